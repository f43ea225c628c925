import os
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

from src.models.errors import InputError, MetricError

CURVE_COLUMNS = ["label", "bpp", "psnr"]


@dataclass
class RDPoint:
    """One operating point: bits per original pixel and PSNR in dB."""

    bpp: float
    psnr: float
    label: str = ""


@dataclass
class RDCurve:
    """RD points of one codec, kept sorted by rate."""

    name: str
    points: List[RDPoint] = field(default_factory=list)

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: p.bpp)
        self.validate()

    def validate(self) -> "RDCurve":
        """Raises MetricError for non-positive rates or rates that are not strictly increasing."""
        rates = [p.bpp for p in self.points]
        if any(r <= 0 for r in rates):
            raise MetricError(f"curve {self.name!r} has non-positive bpp values")
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise MetricError(f"curve {self.name!r} has repeated bpp values")
        return self

    def __len__(self) -> int:
        return len(self.points)

    def add(self, point: RDPoint) -> "RDCurve":
        return RDCurve(self.name, self.points + [point])

    @property
    def bpp(self) -> np.ndarray:
        return np.array([p.bpp for p in self.points])

    @property
    def psnr(self) -> np.ndarray:
        return np.array([p.psnr for p in self.points])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([(p.label, p.bpp, p.psnr) for p in self.points], columns=CURVE_COLUMNS)

    def to_csv(self, path: str) -> None:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        self.to_frame().to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path: str, name: Optional[str] = None) -> "RDCurve":
        """Read a curve file with at least `bpp` and `psnr` columns."""
        if not os.path.isfile(path):
            raise InputError(f"RD curve file not found: {path}")
        frame = pd.read_csv(path)
        missing = {"bpp", "psnr"} - set(frame.columns)
        if missing:
            raise InputError(f"{path} lacks columns: {', '.join(sorted(missing))}")
        labels = frame["label"].fillna("").astype(str) if "label" in frame.columns else [""] * len(frame)
        points = [RDPoint(float(b), float(q), label) for b, q, label in zip(frame["bpp"], frame["psnr"], labels)]
        return cls(name or os.path.splitext(os.path.basename(path))[0], points)


@dataclass
class ErfMap:
    """Effective receptive field of one feature point, normalized to a maximum of 1."""

    values: np.ndarray
    threshold: float = 0.3
    point: tuple = ()

    def area(self) -> int:
        """Number of pixels above the threshold."""
        return int(np.count_nonzero(self.values > self.threshold))

    def clipped(self) -> np.ndarray:
        return np.minimum(self.values, self.threshold) / self.threshold

    def to_image(self) -> np.ndarray:
        """8-bit grayscale rendering of the clipped map."""
        return np.round(self.clipped() * 255.0).astype(np.uint8)
