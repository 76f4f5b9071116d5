"""Rate-distortion curves and the Bjontegaard rate difference.

Log2-rate is interpolated as a function of quality with monotone piecewise
cubic Hermite splines and integrated exactly over the shared quality range.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from ..errors import ConfigurationError, FormatError

MIN_POINTS = 4
RD_CSV_FIELDS = ("label", "metric", "bpp", "quality")


@dataclass(frozen=True)
class RdPoint:
    bpp: float
    quality: float


@dataclass(frozen=True)
class RdCurve:
    label: str
    metric: str
    points: tuple[RdPoint, ...]

    def __post_init__(self):
        bpp = self.bpp
        if np.any(~np.isfinite(bpp)) or np.any(bpp <= 0):
            raise ConfigurationError(f"curve {self.label!r}: every bpp must be finite and positive")
        if np.any(np.diff(bpp) <= 0):
            raise ConfigurationError(f"curve {self.label!r}: bpp must be strictly increasing")
        if np.any(np.diff(self.quality) < 0):
            warnings.warn(f"curve {self.label!r}: quality decreases somewhere as bpp grows", stacklevel=3)

    @classmethod
    def from_arrays(cls, label: str, metric: str, bpp, quality) -> "RdCurve":
        return cls(label, metric, tuple(RdPoint(float(b), float(q)) for b, q in zip(bpp, quality)))

    @property
    def bpp(self) -> np.ndarray:
        return np.array([p.bpp for p in self.points], dtype=np.float64)

    @property
    def quality(self) -> np.ndarray:
        return np.array([p.quality for p in self.points], dtype=np.float64)


def rd_curves_csv(curves) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RD_CSV_FIELDS)
    for c in curves:
        for p in c.points:
            w.writerow([c.label, c.metric, repr(p.bpp), repr(p.quality)])
    return buf.getvalue()


def read_rd_curves(text: str) -> list[RdCurve]:
    """Parse the ``label,metric,bpp,quality`` CSV; rows are grouped by (label, metric) in file order."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or any(f not in reader.fieldnames for f in RD_CSV_FIELDS):
        raise FormatError(f"RD curve CSV needs the columns {', '.join(RD_CSV_FIELDS)}")
    groups: dict[tuple[str, str], list[tuple[float, float]]] = {}
    for lineno, row in enumerate(reader, 2):
        try:
            point = (float(row["bpp"]), float(row["quality"]))
        except (TypeError, ValueError):
            raise FormatError(f"RD curve CSV line {lineno}: non-numeric bpp or quality") from None
        groups.setdefault((row["label"], row["metric"]), []).append(point)
    if not groups:
        raise FormatError("RD curve CSV has no rows")
    curves = []
    for (label, metric), pts in groups.items():
        pts.sort()
        curves.append(RdCurve.from_arrays(label, metric, [p[0] for p in pts], [p[1] for p in pts]))
    return curves


def _log_rate_interpolant(curve: RdCurve) -> PchipInterpolator:
    q, r = curve.quality, np.log2(curve.bpp)
    order = np.argsort(q, kind="stable")
    q, r = q[order], r[order]
    if np.any(np.diff(q) <= 0):
        raise ConfigurationError(f"curve {curve.label!r}: repeated quality values cannot be interpolated")
    return PchipInterpolator(q, r, extrapolate=False)


def bd_rate(anchor: RdCurve, test: RdCurve) -> float:
    """Average rate difference of ``test`` against ``anchor`` in percent (negative: test saves rate)."""
    for c in (anchor, test):
        if len(c.points) < MIN_POINTS:
            raise ConfigurationError(f"curve {c.label!r} has {len(c.points)} points; BD-rate needs {MIN_POINTS}")
    if anchor.metric != test.metric:
        raise ConfigurationError(f"curves use different metrics: {anchor.metric!r} vs {test.metric!r}")
    lo = max(anchor.quality.min(), test.quality.min())
    hi = min(anchor.quality.max(), test.quality.max())
    if not lo < hi:
        raise ConfigurationError(
            f"quality ranges do not overlap: {anchor.label} "
            f"[{anchor.quality.min():.4g}, {anchor.quality.max():.4g}] vs {test.label} "
            f"[{test.quality.min():.4g}, {test.quality.max():.4g}]"
        )
    ia = _log_rate_interpolant(anchor).integrate(lo, hi)
    it = _log_rate_interpolant(test).integrate(lo, hi)
    avg = (it - ia) / (hi - lo)
    return (2.0**avg - 1.0) * 100.0


def format_percent(value: float) -> str:
    return "nan" if math.isnan(value) else f"{value:.2f}%"
