"""Single-level 2-D Haar wavelet transform used as a parameter-free down/up-sampler."""

from dataclasses import dataclass
from typing import Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.models.errors import DimensionError

# Rows: LL, HL, LH, HH. Each filter is applied as a stride-2 correlation over 2x2 blocks.
HAAR_FILTERS = (
    ((1.0, 1.0), (1.0, 1.0)),
    ((-1.0, 1.0), (-1.0, 1.0)),
    ((-1.0, -1.0), (1.0, 1.0)),
    ((1.0, -1.0), (-1.0, 1.0)),
)


@dataclass
class WaveletCoeffs:
    """Sub-bands laid out as [LL(all C), HL(all C), LH(all C), HH(all C)] along the channel axis."""

    data: torch.Tensor
    source_shape: Tuple[int, int, int]

    @property
    def subbands(self) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        return tuple(self.data.chunk(4, dim=-3))


def _haar_weight(scale: float, like: torch.Tensor) -> torch.Tensor:
    return torch.tensor(HAAR_FILTERS, dtype=like.dtype, device=like.device).unsqueeze(1) * scale


def dwt2(image: torch.Tensor, scale: float = 0.5) -> WaveletCoeffs:
    """Forward Haar transform of a (..., C, H, W) tensor.

    Args:
        image: Input with even height and width.
        scale: Filter gain; 0.5 makes the transform orthonormal.

    Returns:
        Coefficients of shape (..., 4C, H/2, W/2).
    """
    if image.dim() < 3:
        raise DimensionError(f"dwt2 expects (..., C, H, W), got shape {tuple(image.shape)}")
    *lead, c, h, w = image.shape
    if h % 2 or w % 2:
        raise DimensionError(f"dwt2 needs even spatial dims, got {h}x{w}")

    planes = image.reshape(-1, 1, h, w)
    bands = F.conv2d(planes, _haar_weight(scale, image), stride=2)
    bands = bands.reshape(-1, c, 4, h // 2, w // 2).transpose(1, 2)
    data = bands.reshape(*lead, 4 * c, h // 2, w // 2)
    return WaveletCoeffs(data=data, source_shape=(c, h, w))


def idwt2(coeffs, scale: float = 0.5) -> torch.Tensor:
    """Inverse of dwt2 for a WaveletCoeffs or a raw (..., 4C, h, w) tensor."""
    data = coeffs.data if isinstance(coeffs, WaveletCoeffs) else coeffs
    if data.dim() < 3:
        raise DimensionError(f"idwt2 expects (..., 4C, h, w), got shape {tuple(data.shape)}")
    *lead, c4, h, w = data.shape
    if c4 % 4:
        raise DimensionError(f"idwt2 needs a channel count divisible by 4, got {c4}")
    c = c4 // 4

    bands = data.reshape(-1, 4, c, h, w).transpose(1, 2).reshape(-1, 4, h, w)
    # The filter bank is orthogonal with squared norm 4, so the adjoint scaled by 1/(4*scale) inverts it.
    planes = F.conv_transpose2d(bands, _haar_weight(1.0 / (4.0 * scale), data), stride=2)
    return planes.reshape(*lead, c, 2 * h, 2 * w)


class HaarDWT(nn.Module):
    """Parameter-free 2x2 Haar analysis as a layer."""

    def __init__(self, scale: float = 0.5):
        super().__init__()
        self.scale = scale

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Split each channel into its four Haar subbands.

        Args:
            x: (B, C, H, W) tensor with even H and W.

        Returns:
            (B, 4C, H/2, W/2) tensor laid out as LL, HL, LH, HH, each band over all C channels.
        """
        return dwt2(x, self.scale).data


class HaarIDWT(nn.Module):
    def __init__(self, scale: float = 0.5):
        super().__init__()
        self.scale = scale

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return idwt2(x, self.scale)
