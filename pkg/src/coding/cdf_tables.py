"""Deterministic integer CDF tables for the Gaussian scale table and the factorized prior."""

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from compressai._CXX import pmf_to_quantized_cdf
from scipy.stats import norm

from src.network.entropy import SCALE_MAX, SCALE_MIN

logger = logging.getLogger(__name__)

PROBABILITY_BITS = 16
TOTAL_FREQUENCY = 1 << PROBABILITY_BITS
SCALE_LEVELS = 64
TAIL_MASS = 1e-9
# Standard-normal quantile leaving about TAIL_MASS in both tails together
TAIL_QUANTILE = 6.1


@dataclass(frozen=True)
class CdfTable:
    """Cumulative frequencies of symbols offset, offset+1, ... followed by one escape bin.

    cdf[0] = 0, cdf[-1] = TOTAL_FREQUENCY and cdf is strictly increasing.
    """

    cdf: Tuple[int, ...]
    offset: int

    @property
    def num_symbols(self) -> int:
        return len(self.cdf) - 2

    @property
    def escape_index(self) -> int:
        return len(self.cdf) - 2

    @property
    def frequencies(self) -> np.ndarray:
        return np.diff(np.asarray(self.cdf, dtype=np.int64))

    def index_of(self, value: int) -> int:
        index = value - self.offset
        return index if 0 <= index < self.num_symbols else self.escape_index

    def probability(self, value: int) -> float:
        index = self.index_of(value)
        return (self.cdf[index + 1] - self.cdf[index]) / TOTAL_FREQUENCY


def scale_table(levels: int = SCALE_LEVELS, minimum: float = SCALE_MIN, maximum: float = SCALE_MAX) -> np.ndarray:
    """Log-spaced scales shared by encoder and decoder."""
    return np.exp(np.linspace(math.log(minimum), math.log(maximum), levels))


def scale_indexes(scales: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Index of the smallest table scale >= each scale; scales above the table map to the last entry."""
    indexes = np.searchsorted(table, np.asarray(scales, dtype=np.float64), side="left")
    return np.minimum(indexes, len(table) - 1)


def quantize_pmf(pmf: np.ndarray) -> np.ndarray:
    """Integer frequencies summing to TOTAL_FREQUENCY for symbol masses plus a trailing escape bin.

    The escape bin receives the mass missing from pmf. Quantization is compressai's
    pmf_to_quantized_cdf, which gives every bin at least one count.

    Args:
        pmf: Non-negative masses of the explicit symbols.

    Returns:
        int64 array of len(pmf) + 1 frequencies.
    """
    pmf = np.asarray(pmf, dtype=np.float64)
    if len(pmf) + 1 > TOTAL_FREQUENCY:
        raise ValueError(f"{len(pmf)} symbols do not fit a {PROBABILITY_BITS}-bit table")
    escape = max(0.0, 1.0 - float(pmf.sum()))
    cdf = pmf_to_quantized_cdf(np.append(pmf, escape).tolist(), PROBABILITY_BITS)
    return np.diff(np.asarray(cdf, dtype=np.int64))


def _table_from_freqs(freqs: np.ndarray, offset: int) -> CdfTable:
    cdf = np.concatenate(([0], np.cumsum(freqs)))
    return CdfTable(cdf=tuple(int(c) for c in cdf), offset=offset)


def gaussian_support(scale: float, symbol_bound: int) -> int:
    return int(min(symbol_bound, math.ceil(scale * TAIL_QUANTILE)))


def build_cdf_tables(table: np.ndarray, symbol_bound: int = 255) -> List[CdfTable]:
    """One zero-mean Gaussian bin table per scale.

    Masses come from a single float64 pass of the normal CDF; everything after is integer arithmetic.
    """
    tables = []
    for scale in table:
        bound = gaussian_support(float(scale), symbol_bound)
        magnitude = np.abs(np.arange(-bound, bound + 1, dtype=np.float64))
        pmf = norm.cdf((0.5 - magnitude) / scale) - norm.cdf((-0.5 - magnitude) / scale)
        tables.append(_table_from_freqs(quantize_pmf(pmf), offset=-bound))
    logger.debug(f"Built {len(tables)} Gaussian CDF tables, largest has {tables[-1].num_symbols} symbols")
    return tables


def build_factorized_tables(pmf: np.ndarray, symbol_bound: int) -> List[CdfTable]:
    """Per-channel tables from masses over [-symbol_bound, symbol_bound], trimmed to the non-negligible range."""
    tables = []
    for channel_pmf in pmf:
        left_tail = np.cumsum(channel_pmf)
        right_tail = np.cumsum(channel_pmf[::-1])[::-1]
        keep = np.flatnonzero((left_tail > TAIL_MASS / 2) & (right_tail > TAIL_MASS / 2))
        if len(keep) == 0:
            start, stop = 0, len(channel_pmf) - 1
        else:
            start, stop = int(keep[0]), int(keep[-1])
        trimmed = channel_pmf[start : stop + 1]
        tables.append(_table_from_freqs(quantize_pmf(trimmed), offset=start - symbol_bound))
    return tables
