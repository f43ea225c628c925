"""Shared numerical checks for the unit tests."""

from typing import Callable, Sequence, Union

import numpy as np
import torch
import torch.nn as nn

Output = Union[torch.Tensor, Sequence[torch.Tensor]]


def flatten(output: Output) -> torch.Tensor:
    if isinstance(output, torch.Tensor):
        return output.reshape(-1)
    return torch.cat([part.reshape(-1) for part in output])


def input_gradcheck(fn: Callable[..., Output], *inputs: torch.Tensor) -> bool:
    """torch.autograd.gradcheck of fn with respect to double-precision inputs."""
    inputs = tuple(x.detach().double().requires_grad_(True) for x in inputs)
    return torch.autograd.gradcheck(lambda *xs: flatten(fn(*xs)), inputs, eps=1e-6, atol=1e-6, rtol=1e-4)


def parameter_gradient_error(module: nn.Module, fn: Callable[[], Output], eps: float = 1e-6, seed: int = 0) -> float:
    """Relative error between the analytic directional derivative over all parameters and a central difference.

    The scalar compared is a fixed random projection of fn()'s output. Run on a double-precision module.
    """
    generator = torch.Generator().manual_seed(seed)
    params = [p for p in module.parameters() if p.requires_grad]
    weights = torch.randn(flatten(fn()).shape, generator=generator, dtype=torch.float64)
    directions = [torch.randn(p.shape, generator=generator, dtype=p.dtype) for p in params]

    def projected() -> torch.Tensor:
        return (flatten(fn()) * weights).sum()

    module.zero_grad()
    projected().backward()
    analytic = sum(float((p.grad * d).sum()) for p, d in zip(params, directions) if p.grad is not None)

    with torch.no_grad():
        for p, d in zip(params, directions):
            p.add_(eps * d)
        plus = float(projected())
        for p, d in zip(params, directions):
            p.sub_(2 * eps * d)
        minus = float(projected())
        for p, d in zip(params, directions):
            p.add_(eps * d)
    numeric = (plus - minus) / (2 * eps)
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def zero_parameters(module: nn.Module):
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()


def random_image(height: int, width: int, seed: int = 0) -> np.ndarray:
    """Smooth-ish 8-bit RGB test image: gradients plus noise."""
    rng = np.random.default_rng(seed)
    rows = np.linspace(0, 255, height)[:, None, None]
    cols = np.linspace(0, 255, width)[None, :, None]
    base = 0.5 * rows + 0.3 * cols + np.array([0.0, 40.0, 80.0])
    noise = rng.normal(0, 12, size=(height, width, 3))
    return np.clip(base + noise, 0, 255).astype(np.uint8)
