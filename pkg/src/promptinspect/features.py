"""Quality features extracted from crimp force curves.

A curve is a fixed-length series of force readings sampled at uniform
displacement steps. Quality monitoring uses two window features: the
least-squares slope of the force rise between points 150 and 190, and the
trapezoidal area under the curve between points 250 and 300. Both windows
are 0-based and inclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CurveLengthError, IndexRangeError

CURVE_LENGTH = 500
SLOPE_WINDOW = (150, 190)
AUC_WINDOW = (250, 300)

REFERENCE_BLOCK_HEADER = "REFERENCE DATA:"
SLOPE_LINE_LABEL = "SLOPE datapoint 150 to 190"
AUC_LINE_LABEL = "AUC datapoint 250 to 300"


@dataclass(frozen=True)
class Curve:
    """One force curve plus its ground-truth annotation, if known."""

    values: tuple[float, ...]
    id: str
    label: int | None = None
    defect_class: str | None = None

    def __post_init__(self) -> None:
        if len(self.values) != CURVE_LENGTH:
            raise CurveLengthError(
                f"curve {self.id!r} has {len(self.values)} points, expected {CURVE_LENGTH}"
            )
        if not np.all(np.isfinite(self.values)):
            raise CurveLengthError(f"curve {self.id!r} contains non-finite values")


@dataclass(frozen=True)
class FeatureVector:
    slope_150_190: float
    auc_250_300: float


def _check_window(n: int, a: int, b: int) -> None:
    if not (0 <= a < b < n):
        raise IndexRangeError(f"window [{a}, {b}] invalid for curve of length {n}")


def slope(curve: Curve, a: int, b: int, method: str = "ols") -> float:
    """Slope of the force trend over the inclusive window [a, b].

    The default is the ordinary least-squares fit against the integer point
    indices, which is robust to single-point noise. ``method="endpoint"``
    gives the plain (y_b - y_a) / (b - a) difference for sensitivity checks.

    Sums go through math.fsum (exactly rounded) so rendered feature text is
    bit-identical across platforms; request fingerprints depend on it.
    """
    _check_window(len(curve.values), a, b)
    y = curve.values[a : b + 1]
    if method == "endpoint":
        return (y[-1] - y[0]) / (b - a)
    if method != "ols":
        raise ValueError(f"unknown slope method {method!r}")
    n = b - a + 1
    x_mean = (a + b) / 2.0
    y_mean = math.fsum(y) / n
    xc = [i - x_mean for i in range(a, b + 1)]
    sxy = math.fsum(xi * (yi - y_mean) for xi, yi in zip(xc, y))
    sxx = math.fsum(xi * xi for xi in xc)
    return sxy / sxx


def auc(curve: Curve, a: int, b: int) -> float:
    """Trapezoidal area under the curve over [a, b] inclusive, unit spacing."""
    _check_window(len(curve.values), a, b)
    y = curve.values[a : b + 1]
    return math.fsum(y) - 0.5 * (y[0] + y[-1])


def extract(curve: Curve) -> FeatureVector:
    """The two quality features at their fixed monitoring windows."""
    return FeatureVector(
        slope_150_190=slope(curve, *SLOPE_WINDOW),
        auc_250_300=auc(curve, *AUC_WINDOW),
    )


def format_feature(x: float) -> str:
    """Shortest round-trip decimal, capped at 7 significant digits."""
    x = float(x)
    text = repr(x)
    digits = sum(c.isdigit() for c in text.split("e")[0].lstrip("-0."))
    if digits > 7:
        text = f"{x:.7g}"
    return text


def feature_lines(features: FeatureVector) -> str:
    """The two labeled feature lines for one sample, as shown to the model."""
    return (
        f"{SLOPE_LINE_LABEL}: {format_feature(features.slope_150_190)}\n"
        f"{AUC_LINE_LABEL}: {format_feature(features.auc_250_300)}"
    )


def render_reference_block(refs: list[tuple[str, FeatureVector]]) -> str:
    """Few-shot reference block listing the non-anomalous samples' features.

    ``refs`` pairs a sample id with its features; ids are not rendered, the
    entries are numbered in order.
    """
    if not refs:
        raise ValueError("reference block needs at least one sample")
    parts = [REFERENCE_BLOCK_HEADER]
    for k, (_, fv) in enumerate(refs, start=1):
        parts.append(f"- Non-anomalous sample {k}\n{feature_lines(fv)}")
    return "\n\n".join(parts)
