import json
import logging
import os
import time
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch
import torch.nn as nn
from matplotlib.figure import Figure

from src.models.bitstream import Bitstream
from src.models.errors import ConfigError, InputError
from src.models.rd_curve import ErfMap, RDCurve, RDPoint
from src.network.attention import ChannelAttention
from src.network.autoencoder import INPUT_MULTIPLE
from src.network.blocks import SchBlock
from src.network.sch_model import SchCompressionModel
from src.services.codec_service import ImageCodec
from src.utils import metrics
from src.utils.dataset import list_images
from src.utils.image_io import load_image, pad_image, save_png, to_tensor

logger = logging.getLogger(__name__)

NAMED_TAPS = ("residual", "space_attention", "channel_attention")


def resolve_tap(model: SchCompressionModel, tap: str) -> Tuple[str, nn.Module]:
    """Find the module behind a tap name.

    Named taps pick the matching branch of the last analysis SCH block that has it; anything else is
    treated as a dotted submodule path such as "g_a.stem.conv1".

    Raises:
        ConfigError: if nothing matches.
    """
    if tap in NAMED_TAPS:
        found = None
        for name, module in model.g_a.named_modules():
            if not isinstance(module, SchBlock):
                continue
            if tap == "residual":
                found = (f"g_a.{name}.residual", module.residual)
            elif module.attention.kind == tap.split("_")[0]:
                found = (f"g_a.{name}.attention", module.attention)
        if found is None:
            raise ConfigError(f"the analysis transform has no SCH block with a {tap} branch")
        return found
    try:
        return tap, model.get_submodule(tap)
    except AttributeError as e:
        raise ConfigError(f"unknown tap {tap!r}") from e


def erf_map(
    model: SchCompressionModel,
    image: np.ndarray,
    tap: str = "channel_attention",
    point: Optional[Tuple[int, int]] = None,
    threshold: float = 0.3,
) -> ErfMap:
    """Effective receptive field of one feature point of a tapped module.

    The channels of the tapped output at `point` (feature-map coordinates, the center by default) are
    summed and back-propagated to the input. The map is |d/dx| summed over color channels, divided by
    its maximum and cropped to the image size.
    """
    if not 0 < threshold <= 1:
        raise ConfigError(f"ERF threshold must be in (0, 1], got {threshold}")
    tap_name, module = resolve_tap(model, tap)
    height, width = image.shape[:2]
    model.eval()
    x = to_tensor(pad_image(image, INPUT_MULTIPLE)).to(next(model.parameters()).device).requires_grad_(True)

    captured: Dict[str, torch.Tensor] = {}
    handle = module.register_forward_hook(lambda _m, _i, out: captured.setdefault("out", out))
    try:
        if tap_name.startswith("g_a."):
            model.g_a(x)
        else:
            model(x, noise=False)
    finally:
        handle.remove()
    if "out" not in captured:
        raise ConfigError(f"tap {tap_name} was not reached by the forward pass")

    feature = captured["out"]
    rows, cols = feature.shape[-2:]
    row, col = point if point is not None else (rows // 2, cols // 2)
    if not (0 <= row < rows and 0 <= col < cols):
        raise ConfigError(f"ERF point {(row, col)} is outside the {rows}x{cols} feature map")
    feature[0, :, row, col].sum().backward()

    grad = x.grad[0].abs().sum(dim=0)[:height, :width].detach().cpu().double().numpy()
    peak = grad.max()
    values = grad / peak if peak > 0 else grad
    logger.debug(f"ERF of {tap_name} at {(row, col)}: peak gradient {peak:.3g}")
    return ErfMap(values=values, threshold=threshold, point=(row, col))


@dataclass
class ChannelAttentionMaps:
    """Attention of one channel-attention block: shape (windows, heads, tokens, tokens)."""

    module_name: str
    maps: np.ndarray

    def __len__(self) -> int:
        return self.maps.shape[0] * self.maps.shape[1]

    def save_pngs(self, directory: str) -> List[str]:
        """One grayscale PNG per (window, head), scaled by the map's maximum."""
        paths = []
        for window, head in np.ndindex(*self.maps.shape[:2]):
            attn = self.maps[window, head]
            image = np.round(attn / max(attn.max(), 1e-12) * 255.0).astype(np.uint8)
            path = os.path.join(directory, f"window{window:04d}_head{head:02d}.png")
            save_png(image, path)
            paths.append(path)
        logger.info(f"Wrote {len(paths)} attention maps of {self.module_name} to {directory}")
        return paths


def channel_attention_modules(model: SchCompressionModel) -> List[Tuple[str, ChannelAttention]]:
    return [(name, m) for name, m in model.named_modules() if isinstance(m, ChannelAttention)]


def dump_channel_attention(
    model: SchCompressionModel, image: np.ndarray, block_index: int = 0
) -> ChannelAttentionMaps:
    """Attention maps of the block_index-th channel-attention block, in model order.

    Raises:
        ConfigError: if the model has no such block.
    """
    modules = channel_attention_modules(model)
    if not 0 <= block_index < len(modules):
        raise ConfigError(f"block index {block_index} out of range; the model has {len(modules)} channel blocks")
    name, module = modules[block_index]
    model.eval()
    x = to_tensor(pad_image(image, INPUT_MULTIPLE)).to(next(model.parameters()).device)
    module.keep_attention = True
    try:
        with torch.no_grad():
            if name.startswith("g_a."):
                model.g_a(x)
            else:
                model(x, noise=False)
        maps = module.last_attention.cpu().numpy()
    finally:
        module.keep_attention = False
        module.last_attention = None
    return ChannelAttentionMaps(module_name=name, maps=maps)


@dataclass
class DatasetReport:
    """Dataset evaluation: mean operating point, per-image rows and the rate estimate gap in percent."""

    point: RDPoint
    table: pd.DataFrame
    estimated_bpp: float
    estimate_gap: float
    mismatches: int = 0

    def summary(self) -> Dict:
        return {
            "images": len(self.table),
            "bpp": self.point.bpp,
            "psnr": self.point.psnr,
            "estimated_bpp": self.estimated_bpp,
            "estimate_gap_percent": self.estimate_gap,
            "decoder_mismatches": self.mismatches,
        }


def eval_dataset(
    model: SchCompressionModel,
    directory: str,
    output_dir: Optional[str] = None,
    curve_path: Optional[str] = None,
    label: str = "",
    device: str = "cpu",
) -> DatasetReport:
    """Code every image of a directory through real bitstreams and measure rate and PSNR.

    Writes per_image.csv and summary.json to output_dir and appends the mean point to the curve file
    at curve_path when given.
    """
    paths = list_images(directory)
    codec = ImageCodec(model, device)
    rows = []
    mismatches = 0
    for path in paths:
        image = load_image(path)
        start = time.perf_counter()
        encoded = codec.encode(image)
        payload = encoded.bitstream.to_bytes()
        encode_seconds = time.perf_counter() - start

        start = time.perf_counter()
        decoded = codec.decode(Bitstream.from_bytes(payload))
        decode_seconds = time.perf_counter() - start
        if not np.array_equal(decoded, encoded.reconstruction):
            mismatches += 1
            logger.warning(f"Decoder output differs from the encoder reconstruction for {path}")

        height, width = image.shape[:2]
        row = {
            "image": os.path.basename(path),
            "height": height,
            "width": width,
            "bytes": len(payload),
            "bpp": metrics.bits_per_pixel(len(payload) * 8, height, width),
            "estimated_bpp": encoded.estimated_bpp,
            "psnr": metrics.psnr(image, decoded),
            "encode_seconds": encode_seconds,
            "decode_seconds": decode_seconds,
        }
        logger.info(f"{row['image']}: {row['bpp']:.4f} bpp, {row['psnr']:.2f} dB")
        rows.append(row)

    table = pd.DataFrame(rows)
    estimated = float(table["estimated_bpp"].mean())
    actual = float(table["bpp"].mean())
    report = DatasetReport(
        point=RDPoint(bpp=actual, psnr=float(table["psnr"].mean()), label=label),
        table=table,
        estimated_bpp=estimated,
        estimate_gap=(actual - estimated) / estimated * 100.0 if estimated > 0 else float("nan"),
        mismatches=mismatches,
    )
    logger.info(
        f"Mean over {len(table)} images: {actual:.4f} bpp, {report.point.psnr:.2f} dB, "
        f"estimate gap {report.estimate_gap:.2f}%"
    )

    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        table.to_csv(os.path.join(output_dir, "per_image.csv"), index=False)
        with open(os.path.join(output_dir, "summary.json"), "w") as f:
            json.dump({**report.summary(), "point": asdict(report.point)}, f, indent=2)
    if curve_path:
        append_point(curve_path, report.point)
    return report


def append_point(curve_path: str, point: RDPoint) -> RDCurve:
    """Add a point to a curve file, creating it when missing."""
    try:
        curve = RDCurve.from_csv(curve_path)
    except InputError:
        curve = RDCurve(os.path.splitext(os.path.basename(curve_path))[0])
    curve = curve.add(point)
    curve.to_csv(curve_path)
    return curve


def bd_rate(anchor: RDCurve, test: RDCurve, piecewise: bool = False) -> float:
    """BD-rate of test against anchor in percent."""
    return metrics.bd_rate(anchor.bpp, anchor.psnr, test.bpp, test.psnr, piecewise=piecewise)


def plot_rd_curves(curves: Sequence[RDCurve], path: str, title: str = "") -> str:
    """PSNR against bpp for every curve, written as a static image."""
    fig = Figure(figsize=(6, 4.5))
    ax = fig.add_subplot()
    for curve in curves:
        ax.plot(curve.bpp, curve.psnr, marker="o", label=curve.name)
    ax.set_xlabel("bpp")
    ax.set_ylabel("PSNR (dB)")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    logger.info(f"Saved RD plot of {len(curves)} curves to {path}")
    return path
