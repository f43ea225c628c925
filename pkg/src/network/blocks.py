"""Convolutional residual blocks and the space-channel hybrid (SCH) block."""

from typing import List, Optional

import torch
import torch.nn as nn
import torch.nn.functional as F
from compressai.layers import conv1x1, conv3x3, subpel_conv3x3

from src.models.errors import ConfigError, DimensionError
from src.network.attention import WindowAttentionBlock

LEAKY_SLOPE = 0.01


class ResidualBlock(nn.Module):
    """Two 3x3 convolutions with a leaky rectifier between them, plus a skip path.

    The skip is the identity when widths match and a 1x1 projection otherwise.
    """

    def __init__(self, in_ch: int, out_ch: Optional[int] = None):
        super().__init__()
        out_ch = out_ch or in_ch
        self.conv1 = conv3x3(in_ch, out_ch)
        self.act = nn.LeakyReLU(LEAKY_SLOPE)
        self.conv2 = conv3x3(out_ch, out_ch)
        self.skip = conv1x1(in_ch, out_ch) if in_ch != out_ch else None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        identity = x if self.skip is None else self.skip(x)
        return self.conv2(self.act(self.conv1(x))) + identity


class ResidualBlockWithStride(nn.Module):
    """Down-sampling residual block: stride-2 3x3 conv, leaky rectifier, 3x3 conv; stride-2 1x1 skip."""

    def __init__(self, in_ch: int, out_ch: int, stride: int = 2):
        super().__init__()
        self.stride = stride
        self.conv1 = conv3x3(in_ch, out_ch, stride=stride)
        self.act = nn.LeakyReLU(LEAKY_SLOPE)
        self.conv2 = conv3x3(out_ch, out_ch)
        self.skip = conv1x1(in_ch, out_ch, stride=stride)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        height, width = x.shape[-2:]
        if height % self.stride or width % self.stride:
            raise DimensionError(f"stride-{self.stride} block got a {height}x{width} map")
        return self.conv2(self.act(self.conv1(x))) + self.skip(x)


class ResidualBlockUpsample(nn.Module):
    """Up-sampling residual block with sub-pixel convolutions on both the main and the skip path."""

    def __init__(self, in_ch: int, out_ch: int, upsample: int = 2):
        super().__init__()
        self.subpel_conv = subpel_conv3x3(in_ch, out_ch, r=upsample)
        self.act = nn.LeakyReLU(LEAKY_SLOPE)
        self.conv = conv3x3(out_ch, out_ch)
        self.upsample = subpel_conv3x3(in_ch, out_ch, r=upsample)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(self.act(self.subpel_conv(x))) + self.upsample(x)


class SchBlock(nn.Module):
    """Space-channel hybrid block.

    A 1x1 conv mixes the input, the result is split evenly into an attention half and a convolution
    half, the halves are processed in parallel, concatenated, fused by a second 1x1 conv and added to
    the input. Stage "I" uses window space attention, stage "II" window channel attention.

    Args:
        dim: Channel count, must be even.
        window_size: Attention window side.
        heads: Attention heads.
        stage: "I" or "II".
        mlp_ratio: MLP expansion of the attention branch.
        channel_attention: When False, stage "II" falls back to space attention.
        head_layout: Head layout of channel attention.
        logit_scale: Optional override of the channel attention logit scale.
    """

    def __init__(
        self,
        dim: int,
        window_size: int,
        heads: int,
        stage: str = "I",
        mlp_ratio: float = 2.0,
        channel_attention: bool = True,
        head_layout: str = "channels",
        logit_scale: Optional[float] = None,
    ):
        super().__init__()
        if dim % 2:
            raise ConfigError(f"SCH block needs an even channel count, got {dim}")
        if stage not in ("I", "II"):
            raise ConfigError(f"SCH stage must be 'I' or 'II', got {stage!r}")
        self.stage = stage
        self.window_size = window_size
        kind = "channel" if stage == "II" and channel_attention else "space"
        half = dim // 2
        self.conv_in = conv1x1(dim, dim)
        self.attention = WindowAttentionBlock(half, window_size, heads, kind, mlp_ratio, head_layout, logit_scale)
        self.residual = ResidualBlock(half)
        self.conv_out = conv1x1(dim, dim)

    def _attend(self, x: torch.Tensor) -> torch.Tensor:
        height, width = x.shape[-2:]
        pad_h = -height % self.window_size
        pad_w = -width % self.window_size
        if not pad_h and not pad_w:
            return self.attention(x)
        padded = F.pad(x, (0, pad_w, 0, pad_h), mode="replicate")
        return self.attention(padded)[..., :height, :width]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x_attn, x_conv = self.conv_in(x).chunk(2, dim=1)
        fused = torch.cat((self._attend(x_attn), self.residual(x_conv)), dim=1)
        return x + self.conv_out(fused)


def stack_stages(depth: int) -> List[str]:
    """Stage labels for a stack of `depth` SCH blocks; alternating and always ending with stage II."""
    return ["II" if (depth - 1 - j) % 2 == 0 else "I" for j in range(depth)]


def sch_stack(
    dim: int,
    depth: int,
    window_size: int,
    heads: int,
    mlp_ratio: float = 2.0,
    channel_attention: bool = True,
    head_layout: str = "channels",
    logit_scale: Optional[float] = None,
) -> nn.Sequential:
    return nn.Sequential(
        *[
            SchBlock(dim, window_size, heads, stage, mlp_ratio, channel_attention, head_layout, logit_scale)
            for stage in stack_stages(depth)
        ]
    )
