import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import torch

from src.coding.cdf_tables import CdfTable, build_cdf_tables, build_factorized_tables, scale_indexes, scale_table
from src.coding.quantization import round_half_away
from src.coding.range_coder import range_decode, range_encode
from src.models.bitstream import MAX_SIDE, Bitstream, BitstreamHeader
from src.models.errors import BitstreamError, IncompatibleModelError, InputError
from src.network.autoencoder import DOWNSAMPLE_FACTOR, INPUT_MULTIPLE
from src.network.entropy import factorized_rate, gaussian_rate
from src.network.sch_model import SchCompressionModel
from src.utils.image_io import check_rgb8, pad_image, to_image, to_tensor

logger = logging.getLogger(__name__)


@dataclass
class EncodedImage:
    """Encoder output: the stream, the encoder-side reconstruction and the model's rate estimate."""

    bitstream: Bitstream
    reconstruction: np.ndarray
    estimated_bits: float

    @property
    def actual_bits(self) -> int:
        return len(self.bitstream) * 8

    @property
    def bpp(self) -> float:
        return self.bitstream.bits_per_pixel

    @property
    def estimated_bpp(self) -> float:
        return self.estimated_bits / self.bitstream.num_pixels


class ImageCodec:
    """Encodes RGB images into bitstreams and back with a trained model."""

    def __init__(self, model: SchCompressionModel, device: str = "cpu"):
        """Initialize the codec.

        Args:
            model: Trained compression model; it is switched to eval mode.
            device: Torch device for the network passes. Range coding always runs on the CPU.
        """
        self.model = model.to(device).eval()
        self.device = device
        self.config = model.config
        self.scales = scale_table()
        self.gaussian_tables = build_cdf_tables(self.scales, self.config.symbol_bound)
        self._z_tables: Optional[List[CdfTable]] = None

    @property
    def z_tables(self) -> List[CdfTable]:
        if self._z_tables is None:
            self._z_tables = build_factorized_tables(
                self.model.prior.pmf(self.config.symbol_bound), self.config.symbol_bound
            )
        return self._z_tables

    def _z_table_ids(self, shape: Tuple[int, ...]) -> List[int]:
        channels, height, width = shape[1:]
        return np.repeat(np.arange(channels), height * width).tolist()

    def _gaussian_table_ids(self, scale: torch.Tensor) -> List[int]:
        return scale_indexes(scale.detach().cpu().double().numpy().ravel(), self.scales).tolist()

    @torch.no_grad()
    def encode(self, image: np.ndarray) -> EncodedImage:
        """Encode an (H, W, 3) uint8 image.

        Raises:
            InputError: for anything but an 8-bit RGB array, or one whose padded size exceeds the header limit.
        """
        check_rgb8(image)
        height, width = image.shape[:2]
        padded_size = tuple(-(-side // INPUT_MULTIPLE) * INPUT_MULTIPLE for side in (height, width))
        if max(padded_size) > MAX_SIDE:
            raise InputError(f"image {height}x{width} pads to {padded_size[0]}x{padded_size[1]}, limit is {MAX_SIDE}")
        padded = pad_image(image, INPUT_MULTIPLE)
        x = to_tensor(padded).to(self.device)

        y = self.model.g_a(x)
        z = self.model.h_a(y)
        z_int = round_half_away(z).to(torch.int32)
        z_hat = z_int.to(x.dtype)
        z_stream = range_encode(z_int.cpu().flatten().tolist(), self._z_table_ids(z.shape), self.z_tables)
        estimated = float(factorized_rate(z_hat, self.model.prior).sum())

        mean_side, scale_side = self.model.h_s(z_hat)
        context = self.model.context.start(mean_side, scale_side)
        slice_streams = []
        for index, y_slice in enumerate(self.model.context.layout.split(y)):
            params = context.predict(index)
            q_int = round_half_away(y_slice - params.mean).to(torch.int32)
            q = q_int.to(x.dtype)
            symbols = q_int.cpu().flatten().tolist()
            stream = range_encode(symbols, self._gaussian_table_ids(params.scale), self.gaussian_tables)
            slice_streams.append(stream)
            estimated += float(gaussian_rate(q, params, self.model.gaussian).sum())
            logger.debug(f"Slice {index}: {len(stream)} bytes")

            y_hat = q + params.mean
            context.commit(y_hat + context.residual(index, y_hat))

        x_hat = self.model.g_s(torch.cat(context.decoded, dim=1))
        header = BitstreamHeader(
            config_hash=self.config.config_hash(),
            lambda_index=self.config.lambda_index,
            height=height,
            width=width,
            padded_height=padded.shape[0],
            padded_width=padded.shape[1],
        )
        bitstream = Bitstream(header=header, z_stream=z_stream, slice_streams=slice_streams)
        reconstruction = to_image(x_hat[..., :height, :width])
        logger.info(f"Encoded {width}x{height} image: {len(bitstream)} bytes, {bitstream.bits_per_pixel:.4f} bpp")
        return EncodedImage(bitstream=bitstream, reconstruction=reconstruction, estimated_bits=estimated)

    def _check_header(self, bitstream: Bitstream):
        header = bitstream.header
        if header.config_hash != self.config.config_hash():
            raise IncompatibleModelError(
                f"stream config hash {header.config_hash:08x} does not match model {self.config.config_hash():08x}"
            )
        if header.lambda_index != self.config.lambda_index:
            raise IncompatibleModelError(
                f"stream was coded at lambda index {header.lambda_index}, model is index {self.config.lambda_index}"
            )
        if header.padded_height % INPUT_MULTIPLE or header.padded_width % INPUT_MULTIPLE:
            raise BitstreamError(f"padded size {header.padded_size} is not a multiple of {INPUT_MULTIPLE}")
        if len(bitstream.slice_streams) != self.config.slice_count:
            raise BitstreamError(
                f"stream has {len(bitstream.slice_streams)} slice segments, model expects {self.config.slice_count}"
            )

    @torch.no_grad()
    def decode(self, bitstream: Bitstream) -> np.ndarray:
        """Reconstruct the (H, W, 3) uint8 image coded in `bitstream`.

        Raises:
            IncompatibleModelError: if the stream was produced by a different architecture or lambda.
            BitstreamError: if the stream is malformed or truncated.
        """
        self._check_header(bitstream)
        header = bitstream.header
        z_rows, z_cols = header.padded_height // INPUT_MULTIPLE, header.padded_width // INPUT_MULTIPLE
        z_shape = (1, self.config.z_channels, z_rows, z_cols)
        y_shape = (header.padded_height // DOWNSAMPLE_FACTOR, header.padded_width // DOWNSAMPLE_FACTOR)

        try:
            z_values = range_decode(bitstream.z_stream, self._z_table_ids(z_shape), self.z_tables)
        except BitstreamError as e:
            raise BitstreamError(f"segment z: {e.message}") from e
        z_hat = torch.tensor(z_values, dtype=torch.int32).reshape(z_shape).to(self.device).float()

        mean_side, scale_side = self.model.h_s(z_hat)
        context = self.model.context.start(mean_side, scale_side)
        step = self.config.slice_channels
        for index, stream in enumerate(bitstream.slice_streams):
            params = context.predict(index)
            try:
                values = range_decode(stream, self._gaussian_table_ids(params.scale), self.gaussian_tables)
            except BitstreamError as e:
                raise BitstreamError(f"segment slice {index}: {e.message}") from e
            q = torch.tensor(values, dtype=torch.int32).reshape(1, step, *y_shape).to(self.device).float()
            y_hat = q + params.mean
            context.commit(y_hat + context.residual(index, y_hat))

        x_hat = self.model.g_s(torch.cat(context.decoded, dim=1))
        return to_image(x_hat[..., : header.height, : header.width])


def encode_image(image: np.ndarray, model: SchCompressionModel) -> Bitstream:
    """Encode an (H, W, 3) uint8 image with a fresh codec for model.

    Returns:
        The bitstream only; use ImageCodec.encode for the reconstruction and the rate estimate.
    """
    return ImageCodec(model).encode(image).bitstream


def decode_image(bitstream: Bitstream, model: SchCompressionModel) -> np.ndarray:
    """Decode bitstream with a fresh codec for model.

    Returns:
        The (H, W, 3) uint8 reconstruction at the original size.
    """
    return ImageCodec(model).decode(bitstream)
