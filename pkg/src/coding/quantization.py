from typing import Optional

import torch

from src.models.errors import ConfigError

QUANTIZATION_MODES = ("round", "noise")


def round_half_away(v: torch.Tensor) -> torch.Tensor:
    """Nearest integer, ties away from zero (torch.round rounds ties to even)."""
    return torch.sign(v) * torch.floor(v.abs() + 0.5)


def quantize(v: torch.Tensor, mode: str = "round", generator: Optional[torch.Generator] = None) -> torch.Tensor:
    """Quantize to integers, or add uniform noise in [-0.5, 0.5) as the training-time surrogate.

    Args:
        v: Values to quantize.
        mode: "round" or "noise".
        generator: Optional torch generator for the noise draw.

    Returns:
        Tensor with the same shape as v.
    """
    if mode == "round":
        return round_half_away(v)
    if mode == "noise":
        noise = torch.rand(v.shape, generator=generator, dtype=v.dtype, device=v.device) - 0.5
        return v + noise
    raise ConfigError(f"quantization mode must be one of {QUANTIZATION_MODES}, got {mode!r}")


def ste_round(v: torch.Tensor) -> torch.Tensor:
    """Rounded values in the forward pass, identity gradient in the backward pass."""
    return (round_half_away(v) - v).detach() + v
