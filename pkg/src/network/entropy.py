"""Hyper-prior networks, the factorized prior for z, slice predictors and rate estimation."""

import copy
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import torch
import torch.nn as nn
from compressai.entropy_models import EntropyBottleneck, GaussianConditional
from compressai.layers import conv3x3, subpel_conv3x3
from compressai.ops import LowerBound

from src.models.errors import DimensionError, SequencingError
from src.network.blocks import LEAKY_SLOPE

SCALE_MIN = 0.11
SCALE_MAX = 256.0
LIKELIHOOD_FLOOR = 2.0**-64


@dataclass
class GaussianParams:
    mean: torch.Tensor
    scale: torch.Tensor


@dataclass
class SliceLayout:
    """Uniform split of the M latent channels into ordered slices."""

    slice_count: int
    channels: int

    @property
    def slice_channels(self) -> int:
        return self.channels // self.slice_count

    @property
    def ranges(self) -> List[Tuple[int, int]]:
        step = self.slice_channels
        return [(i * step, (i + 1) * step) for i in range(self.slice_count)]

    def split(self, y: torch.Tensor) -> List[torch.Tensor]:
        return list(y.split(self.slice_channels, dim=1))


class GaussianBinModel(GaussianConditional):
    """Zero-mean Gaussian bin masses with lower bounds on the scale and on the mass.

    Both bounds are compressai LowerBound ops: below the bound the forward value is clamped but
    gradients that push back above it still flow.
    """

    def __init__(self):
        super().__init__(None, scale_bound=SCALE_MIN, likelihood_bound=LIKELIHOOD_FLOOR)

    def likelihood(self, values: torch.Tensor, scales: torch.Tensor) -> torch.Tensor:
        return self.likelihood_lower_bound(self._likelihood(values, scales))


def gaussian_likelihood(values: torch.Tensor, scales: torch.Tensor, bins: GaussianBinModel) -> torch.Tensor:
    """Mass of the unit bin centered on each value under a zero-mean Gaussian."""
    return bins.likelihood(values, scales)


def gaussian_rate(values: torch.Tensor, params: GaussianParams, bins: GaussianBinModel) -> torch.Tensor:
    """Bits per element for coding the residuals `values` with the Gaussian bin model of scale params.scale.

    Args:
        values: Coded residuals y - mean (rounded, or noisy during training).
        params: Slice parameters; only the scale enters the bin mass.
        bins: Bounded Gaussian bin model, a submodule of the network so its bounds follow the device.

    Returns:
        Non-negative bits with the shape of values.
    """
    return -torch.log2(gaussian_likelihood(values, params.scale, bins))


class FactorizedPrior(EntropyBottleneck):
    """Per-channel learned univariate density for z (compressai entropy bottleneck).

    Only the density is used: quantization and the integer tables are handled by the codec, which
    covers the fixed range [-symbol_bound, symbol_bound], so the learned quantiles are frozen.
    """

    def __init__(self, channels: int, filters: Tuple[int, ...] = (3, 3, 3, 3), init_scale: float = 10.0):
        super().__init__(channels, filters=tuple(filters), init_scale=init_scale, likelihood_bound=LIKELIHOOD_FLOOR)
        self.quantiles.requires_grad_(False)

    def _bin_mass(self, values: torch.Tensor) -> torch.Tensor:
        # Newer compressai returns (likelihood, lower, upper).
        result = self._likelihood(values)
        return result[0] if isinstance(result, tuple) else result

    def cdf(self, values: torch.Tensor) -> torch.Tensor:
        """Learned CDF at values of shape (channels, K)."""
        return torch.sigmoid(self._logits_cumulative(values.unsqueeze(1), stop_gradient=False)).squeeze(1)

    def likelihood(self, z: torch.Tensor) -> torch.Tensor:
        """Bin masses for a (B, channels, H, W) tensor, bounded below by LIKELIHOOD_FLOOR."""
        shape = z.shape
        values = z.transpose(0, 1).reshape(self.channels, 1, -1)
        mass = self._bin_mass(values).reshape(self.channels, shape[0], *shape[2:]).transpose(0, 1)
        return self.likelihood_lower_bound(mass)

    @torch.no_grad()
    def pmf(self, symbol_bound: int) -> np.ndarray:
        """Bin masses of the integers [-symbol_bound, symbol_bound] per channel, float64 of shape (C, 2L+1)."""
        prior = copy.deepcopy(self).double().cpu()
        support = torch.arange(-symbol_bound, symbol_bound + 1, dtype=torch.float64)
        values = support.expand(self.channels, -1).unsqueeze(1)
        return prior._bin_mass(values).squeeze(1).clamp_min(0.0).numpy()


def factorized_rate(z_hat: torch.Tensor, prior: FactorizedPrior) -> torch.Tensor:
    """Bits per element of z_hat under the learned factorized prior."""
    return -torch.log2(prior.likelihood(z_hat))


class HyperAnalysis(nn.Module):
    """h_a: (B, M, h, w) -> (B, z_channels, h/4, w/4)."""

    def __init__(self, m: int, n: int, z_channels: int):
        super().__init__()
        self.layers = nn.Sequential(
            conv3x3(m, n),
            nn.LeakyReLU(LEAKY_SLOPE),
            conv3x3(n, n, stride=2),
            nn.LeakyReLU(LEAKY_SLOPE),
            conv3x3(n, z_channels, stride=2),
        )

    def forward(self, y: torch.Tensor) -> torch.Tensor:
        height, width = y.shape[-2:]
        if height % 4 or width % 4:
            raise DimensionError(f"hyper analysis needs latent dims divisible by 4, got {height}x{width}")
        return self.layers(y)


class HyperSynthesis(nn.Module):
    """h_s: z_hat -> (mean_side, scale_side), each of shape (B, M, 4h, 4w)."""

    def __init__(self, z_channels: int, n: int, m: int):
        super().__init__()
        self.layers = nn.Sequential(
            subpel_conv3x3(z_channels, n, r=2),
            nn.LeakyReLU(LEAKY_SLOPE),
            subpel_conv3x3(n, n, r=2),
            nn.LeakyReLU(LEAKY_SLOPE),
            conv3x3(n, 2 * m),
        )

    def forward(self, z_hat: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        mean_side, scale_side = self.layers(z_hat).chunk(2, dim=1)
        return mean_side, scale_side


def _predictor(in_ch: int, hidden: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        conv3x3(in_ch, hidden),
        nn.LeakyReLU(LEAKY_SLOPE),
        conv3x3(hidden, max(hidden // 2, 1)),
        nn.LeakyReLU(LEAKY_SLOPE),
        conv3x3(max(hidden // 2, 1), out_ch),
    )


class ChannelContextModel(nn.Module):
    """Slice predictors e_i and latent residual predictors for channel-wise autoregression.

    Predictor i sees the side features (2M channels) and the i previously decoded slices; residual
    predictor i additionally sees slice i itself.
    """

    def __init__(self, m: int, slice_count: int, hidden: int):
        super().__init__()
        self.layout = SliceLayout(slice_count, m)
        step = self.layout.slice_channels
        self.predictors = nn.ModuleList(_predictor(2 * m + i * step, hidden, 2 * step) for i in range(slice_count))
        self.residual_predictors = nn.ModuleList(
            _predictor(2 * m + (i + 1) * step, hidden, step) for i in range(slice_count)
        )
        self.scale_bound = LowerBound(SCALE_MIN)

    def start(self, mean_side: torch.Tensor, scale_side: torch.Tensor) -> "SliceContext":
        return SliceContext(self, mean_side, scale_side)

    def context_channels(self, index: int) -> int:
        return self.predictors[index][0].in_channels


class SliceContext:
    """Accumulates decoded slices and enforces that slices are predicted strictly in order."""

    def __init__(self, model: ChannelContextModel, mean_side: torch.Tensor, scale_side: torch.Tensor):
        self.model = model
        self.side = torch.cat((mean_side, scale_side), dim=1)
        self.decoded: List[torch.Tensor] = []

    @property
    def next_index(self) -> int:
        return len(self.decoded)

    def _check(self, index: int):
        if index != self.next_index:
            raise SequencingError(f"slice {index} requested but {self.next_index} slices are decoded")

    def predict(self, index: int) -> GaussianParams:
        """Gaussian parameters of slice `index` given the slices decoded so far.

        Scales are bounded to [SCALE_MIN, SCALE_MAX]; below SCALE_MIN the bound still passes gradients that raise them.
        """
        self._check(index)
        features = self.model.predictors[index](torch.cat([self.side, *self.decoded], dim=1))
        mean, log_scale = features.chunk(2, dim=1)
        scale = self.model.scale_bound(torch.exp(log_scale)).clamp(max=SCALE_MAX)
        return GaussianParams(mean=mean, scale=scale)

    def residual(self, index: int, y_hat: torch.Tensor) -> torch.Tensor:
        """Latent residual prediction for slice `index`, bounded to [-0.5, 0.5]."""
        self._check(index)
        features = torch.cat([self.side, *self.decoded, y_hat], dim=1)
        return 0.5 * torch.tanh(self.model.residual_predictors[index](features))

    def commit(self, y_hat: torch.Tensor):
        self.decoded.append(y_hat)
