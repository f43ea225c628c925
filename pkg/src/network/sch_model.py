"""The complete codec network: transforms, hyper-prior and channel-wise context model."""

from dataclasses import dataclass, field
from typing import Dict, List

import torch
import torch.nn as nn

from src.coding.quantization import quantize, ste_round
from src.models.config import ModelConfig
from src.network.autoencoder import AnalysisTransform, SynthesisTransform
from src.network.entropy import (
    ChannelContextModel,
    FactorizedPrior,
    GaussianBinModel,
    GaussianParams,
    HyperAnalysis,
    HyperSynthesis,
    factorized_rate,
    gaussian_rate,
)


@dataclass
class ModelOutput:
    x_hat: torch.Tensor
    y_bits: torch.Tensor
    z_bits: torch.Tensor
    y_hat: torch.Tensor
    slice_params: List[GaussianParams] = field(default_factory=list)

    @property
    def total_bits(self) -> torch.Tensor:
        return self.y_bits.sum() + self.z_bits.sum()


class SchCompressionModel(nn.Module):
    """Learned image codec with space-channel hybrid transforms.

    forward() is the training/estimation path. With noise=True the rate terms see additive uniform
    noise while the synthesis sees rounded latents with a straight-through gradient; with noise=False
    everything is rounded exactly as the bitstream codes it.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config.validate()
        self.g_a = AnalysisTransform(config)
        self.g_s = SynthesisTransform(config)
        self.h_a = HyperAnalysis(config.M, config.N, config.z_channels)
        self.h_s = HyperSynthesis(config.z_channels, config.N, config.M)
        self.prior = FactorizedPrior(config.z_channels)
        self.gaussian = GaussianBinModel()
        self.context = ChannelContextModel(config.M, config.slice_count, config.predictor_channels)

    def forward(self, x: torch.Tensor, noise: bool = True) -> ModelOutput:
        mode = "noise" if noise else "round"
        y = self.g_a(x)
        z = self.h_a(y)
        z_bits = factorized_rate(quantize(z, mode), self.prior)
        z_hat = ste_round(z)

        mean_side, scale_side = self.h_s(z_hat)
        context = self.context.start(mean_side, scale_side)
        y_bits, y_hat_slices, all_params = [], [], []
        for index, y_slice in enumerate(self.context.layout.split(y)):
            params = context.predict(index)
            residual = y_slice - params.mean
            y_bits.append(gaussian_rate(quantize(residual, mode), params, self.gaussian))
            y_hat = ste_round(residual) + params.mean
            y_hat = y_hat + context.residual(index, y_hat)
            context.commit(y_hat)
            y_hat_slices.append(y_hat)
            all_params.append(params)

        y_hat = torch.cat(y_hat_slices, dim=1)
        return ModelOutput(
            x_hat=self.g_s(y_hat),
            y_bits=torch.cat(y_bits, dim=1),
            z_bits=z_bits,
            y_hat=y_hat,
            slice_params=all_params,
        )

    @torch.no_grad()
    def estimate_bits(self, x: torch.Tensor) -> float:
        """Entropy-model estimate of the coded size of x with rounded latents."""
        return float(self(x, noise=False).total_bits)


def count_parameters(model: nn.Module) -> Dict[str, int]:
    """Parameter counts per top-level submodule plus the total."""
    counts = {name: sum(p.numel() for p in child.parameters()) for name, child in model.named_children()}
    counts["total"] = sum(p.numel() for p in model.parameters())
    return counts
