import math
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import integrate, interpolate

from src.models.errors import MetricError

PSNR_CAP = 100.0
PIXEL_MAX = 255.0
MIN_CURVE_POINTS = 4


def psnr_from_mse(mse: float, max_value: float = PIXEL_MAX) -> float:
    """PSNR in dB for an MSE on the scale of max_value; zero MSE gives the 100 dB cap."""
    if mse <= 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(max_value**2 / mse))


def psnr(x: np.ndarray, x_hat: np.ndarray) -> float:
    """PSNR of two 8-bit images (any matching shape)."""
    if x.shape != x_hat.shape:
        raise MetricError(f"cannot compare images of shapes {x.shape} and {x_hat.shape}")
    mse = float(np.mean((x.astype(np.float64) - x_hat.astype(np.float64)) ** 2))
    return psnr_from_mse(mse)


def bits_per_pixel(num_bits: Union[int, float], height: int, width: int) -> float:
    return num_bits / (height * width)


def _curve_arrays(rates: Sequence[float], qualities: Sequence[float], name: str) -> Tuple[np.ndarray, np.ndarray]:
    rate = np.asarray(rates, dtype=np.float64)
    quality = np.asarray(qualities, dtype=np.float64)
    if rate.ndim != 1 or rate.shape != quality.shape:
        raise MetricError(f"{name} curve needs matching 1-D rate and quality arrays")
    if len(rate) < MIN_CURVE_POINTS:
        raise MetricError(f"{name} curve has {len(rate)} points, at least {MIN_CURVE_POINTS} are needed")
    if np.any(rate <= 0):
        raise MetricError(f"{name} curve has non-positive rates")
    order = np.argsort(quality)
    return np.log10(rate[order]), quality[order]


def bd_rate(
    anchor_rate: Sequence[float],
    anchor_psnr: Sequence[float],
    test_rate: Sequence[float],
    test_psnr: Sequence[float],
    piecewise: bool = False,
) -> float:
    """Bjontegaard delta rate of test against anchor, in percent. Negative means test saves bits.

    Log-rate is interpolated as a function of PSNR, with a cubic polynomial by default or a monotone
    piecewise cubic when piecewise is set, and the mean difference over the shared PSNR interval is
    converted back to a rate ratio.

    Raises:
        MetricError: if a curve has fewer than four points or the PSNR ranges do not overlap.
    """
    log_anchor, q_anchor = _curve_arrays(anchor_rate, anchor_psnr, "anchor")
    log_test, q_test = _curve_arrays(test_rate, test_psnr, "test")

    low = max(q_anchor.min(), q_test.min())
    high = min(q_anchor.max(), q_test.max())
    if high <= low:
        raise MetricError(
            f"PSNR ranges do not overlap: [{q_anchor.min():.2f}, {q_anchor.max():.2f}] "
            f"vs [{q_test.min():.2f}, {q_test.max():.2f}]"
        )

    if piecewise:
        samples, interval = np.linspace(low, high, num=100, retstep=True)
        area_anchor = integrate.trapezoid(interpolate.pchip_interpolate(q_anchor, log_anchor, samples), dx=interval)
        area_test = integrate.trapezoid(interpolate.pchip_interpolate(q_test, log_test, samples), dx=interval)
    else:
        int_anchor = np.polyint(np.polyfit(q_anchor, log_anchor, 3))
        int_test = np.polyint(np.polyfit(q_test, log_test, 3))
        area_anchor = np.polyval(int_anchor, high) - np.polyval(int_anchor, low)
        area_test = np.polyval(int_test, high) - np.polyval(int_test, low)

    delta = (area_test - area_anchor) / (high - low)
    return float((10.0**delta - 1.0) * 100.0)
