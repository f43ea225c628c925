import struct
from dataclasses import dataclass, field
from typing import List, Tuple

from src.models.errors import BitstreamError

MAGIC = b"SCH1"
FORMAT_VERSION = 1
# magic, version, config hash, lambda index, H, W, padded H, padded W
HEADER_FORMAT = ">4sBIBHHHH"
HEADER_SIZE = struct.calcsize(HEADER_FORMAT)
LENGTH_FORMAT = ">I"
LENGTH_SIZE = struct.calcsize(LENGTH_FORMAT)
MAX_SIDE = 0xFFFF


@dataclass
class BitstreamHeader:
    config_hash: int
    lambda_index: int
    height: int
    width: int
    padded_height: int
    padded_width: int
    version: int = FORMAT_VERSION

    @property
    def original_size(self) -> Tuple[int, int]:
        return self.height, self.width

    @property
    def padded_size(self) -> Tuple[int, int]:
        return self.padded_height, self.padded_width


@dataclass
class Bitstream:
    """Coded image: header, hyper-latent stream and one stream per latent slice."""

    header: BitstreamHeader
    z_stream: bytes
    slice_streams: List[bytes] = field(default_factory=list)

    @property
    def num_pixels(self) -> int:
        return self.header.height * self.header.width

    def __len__(self) -> int:
        return len(self.to_bytes())

    @property
    def bits_per_pixel(self) -> float:
        """Coded bits per original pixel, header included."""
        return len(self) * 8 / self.num_pixels

    def to_bytes(self) -> bytes:
        h = self.header
        sizes = {"height": h.height, "width": h.width, "padded height": h.padded_height, "padded width": h.padded_width}
        for name, value in sizes.items():
            if not 0 < value <= MAX_SIDE:
                raise BitstreamError(f"image {name} {value} does not fit the header")
        parts = [
            struct.pack(
                HEADER_FORMAT,
                MAGIC,
                h.version,
                h.config_hash,
                h.lambda_index,
                h.height,
                h.width,
                h.padded_height,
                h.padded_width,
            )
        ]
        for segment in [self.z_stream, *self.slice_streams]:
            parts.append(struct.pack(LENGTH_FORMAT, len(segment)))
            parts.append(segment)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        """Parse a serialized stream.

        Raises:
            BitstreamError: on a bad magic or version, or a truncated segment.
        """
        if len(data) < HEADER_SIZE:
            raise BitstreamError(f"stream of {len(data)} bytes is shorter than the {HEADER_SIZE}-byte header")
        magic, version, config_hash, lambda_index, height, width, padded_h, padded_w = struct.unpack_from(
            HEADER_FORMAT, data
        )
        if magic != MAGIC:
            raise BitstreamError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != FORMAT_VERSION:
            raise BitstreamError(f"unsupported format version {version}")
        if padded_h < height or padded_w < width:
            raise BitstreamError(f"padded size {padded_h}x{padded_w} is smaller than image size {height}x{width}")
        header = BitstreamHeader(config_hash, lambda_index, height, width, padded_h, padded_w, version)

        segments = []
        position = HEADER_SIZE
        while position < len(data):
            name = "z" if not segments else f"slice {len(segments) - 1}"
            if position + LENGTH_SIZE > len(data):
                raise BitstreamError(f"truncated length field of segment {name}")
            (length,) = struct.unpack_from(LENGTH_FORMAT, data, position)
            position += LENGTH_SIZE
            if position + length > len(data):
                raise BitstreamError(
                    f"segment {name} declares {length} bytes but only {len(data) - position} remain"
                )
            segments.append(data[position : position + length])
            position += length
        if not segments:
            raise BitstreamError("stream has no hyper-latent segment")
        return cls(header=header, z_stream=segments[0], slice_streams=segments[1:])
