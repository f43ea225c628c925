"""Analysis and synthesis transforms built from the wavelet stem, residual blocks and SCH stacks."""

from collections import OrderedDict

import torch
import torch.nn as nn

from src.models.config import ModelConfig
from src.models.errors import DimensionError
from src.network.blocks import ResidualBlock, ResidualBlockUpsample, ResidualBlockWithStride, sch_stack
from src.network.wavelet import HaarDWT, HaarIDWT

DOWNSAMPLE_FACTOR = 16
# g_a and h_a together reduce by 64; analysis accepts only inputs that survive the whole path
INPUT_MULTIPLE = 64


def _stack(config: ModelConfig, dim: int, depth: int) -> nn.Sequential:
    return sch_stack(
        dim,
        depth,
        config.window_size,
        config.heads,
        config.mlp_ratio,
        config.channel_attention,
        config.channel_head_layout,
        config.channel_logit_scale,
    )


class AnalysisTransform(nn.Module):
    """g_a: image in [0, 1] of shape (B, 3, H, W) -> latent of shape (B, M, H/16, W/16)."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        n, m = config.N, config.M
        if config.use_wavelet:
            self.dwt = HaarDWT(config.wavelet_scale)
            self.stem = ResidualBlock(12, n)
        else:
            self.dwt = nn.Identity()
            self.stem = ResidualBlockWithStride(3, n)
        widths = [(n, n), (n, n), (n, m)]
        self.stages = nn.ModuleList(
            nn.Sequential(
                OrderedDict(
                    down=ResidualBlockWithStride(w_in, w_out),
                    blocks=_stack(config, w_out, depth),
                )
            )
            for (w_in, w_out), depth in zip(widths, config.sch_stack)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        height, width = x.shape[-2:]
        if height % INPUT_MULTIPLE or width % INPUT_MULTIPLE:
            raise DimensionError(f"analysis input {height}x{width} is not a multiple of {INPUT_MULTIPLE}")
        x = self.stem(self.dwt(x))
        for stage in self.stages:
            x = stage(x)
        return x


class SynthesisTransform(nn.Module):
    """g_s: mirror of the analysis transform with up-sampling residual blocks and the inverse wavelet."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        n, m = config.N, config.M
        widths = [(m, n), (n, n), (n, n)]
        self.stages = nn.ModuleList(
            nn.Sequential(
                OrderedDict(
                    blocks=_stack(config, w_in, depth),
                    up=ResidualBlockUpsample(w_in, w_out),
                )
            )
            for (w_in, w_out), depth in zip(widths, reversed(config.sch_stack))
        )
        if config.use_wavelet:
            self.head = ResidualBlock(n, 12)
            self.idwt = HaarIDWT(config.wavelet_scale)
        else:
            self.head = ResidualBlockUpsample(n, 3)
            self.idwt = nn.Identity()

    def forward(self, y_hat: torch.Tensor) -> torch.Tensor:
        x = y_hat
        for stage in self.stages:
            x = stage(x)
        return self.idwt(self.head(x))
