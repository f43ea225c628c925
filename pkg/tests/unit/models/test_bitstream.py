import struct
import unittest

from src.models.bitstream import HEADER_SIZE, MAGIC, Bitstream, BitstreamHeader
from src.models.errors import BitstreamError


class TestBitstream(unittest.TestCase):
    """Test cases for the bitstream container."""

    def setUp(self):
        """Build a small stream."""
        self.header = BitstreamHeader(
            config_hash=0xDEADBEEF, lambda_index=3, height=500, width=700, padded_height=512, padded_width=704
        )
        self.stream = Bitstream(self.header, z_stream=b"\x01\x02\x03", slice_streams=[b"abcd", b"", b"xy"])

    def test_layout(self):
        """Header fields are big-endian and segments are length-prefixed."""
        data = self.stream.to_bytes()
        self.assertEqual(data[:4], MAGIC)
        self.assertEqual(HEADER_SIZE, 4 + 1 + 4 + 1 + 4 * 2)
        self.assertEqual(struct.unpack(">I", data[5:9])[0], 0xDEADBEEF)
        self.assertEqual(struct.unpack(">I", data[HEADER_SIZE : HEADER_SIZE + 4])[0], 3)
        self.assertEqual(len(data), HEADER_SIZE + 4 * 4 + 3 + 4 + 0 + 2)

    def test_parse(self):
        """from_bytes recovers header and segments."""
        parsed = Bitstream.from_bytes(self.stream.to_bytes())
        self.assertEqual(parsed, self.stream)
        self.assertEqual(parsed.header.original_size, (500, 700))

    def test_bits_per_pixel(self):
        """A 4096-byte stream for a 512x768 image is 0.08333 bpp."""
        header = BitstreamHeader(0, 0, 512, 768, 512, 768)
        payload = b"\x00" * (4096 - HEADER_SIZE - 4)
        stream = Bitstream(header, z_stream=payload)
        self.assertEqual(len(stream), 4096)
        self.assertAlmostEqual(stream.bits_per_pixel, 0.08333, places=5)

    def test_bad_magic(self):
        """A corrupted magic byte is rejected."""
        data = bytearray(self.stream.to_bytes())
        data[0] ^= 0xFF
        with self.assertRaises(BitstreamError):
            Bitstream.from_bytes(bytes(data))

    def test_bad_version(self):
        """Unknown versions are rejected."""
        data = bytearray(self.stream.to_bytes())
        data[4] = 9
        with self.assertRaises(BitstreamError):
            Bitstream.from_bytes(bytes(data))

    def test_truncated_segment(self):
        """A cut segment names the failing segment."""
        data = self.stream.to_bytes()[:-1]
        with self.assertRaises(BitstreamError) as ctx:
            Bitstream.from_bytes(data)
        self.assertIn("slice 2", ctx.exception.message)

    def test_short_header(self):
        """Data shorter than the header is rejected."""
        with self.assertRaises(BitstreamError):
            Bitstream.from_bytes(MAGIC)

    def test_missing_segments(self):
        """A header without segments is rejected."""
        with self.assertRaises(BitstreamError):
            Bitstream.from_bytes(self.stream.to_bytes()[:HEADER_SIZE])

    def test_padded_smaller_than_image(self):
        """Inconsistent padded sizes are rejected."""
        header = BitstreamHeader(0, 0, 100, 100, 64, 128)
        with self.assertRaises(BitstreamError):
            Bitstream.from_bytes(Bitstream(header, b"").to_bytes())

    def test_padded_size_over_header_limit(self):
        """A padded side of 65536 raises BitstreamError instead of a struct error."""
        header = BitstreamHeader(0, 0, 64, 65500, 64, 65536)
        with self.assertRaises(BitstreamError):
            Bitstream(header, b"").to_bytes()
