"""Axis-aligned feasibility sets for declipping and dequantization.

Every sample of a clipped or quantized observation constrains the unknown
signal to an interval: exactly-known samples pin it to a point, saturated
samples leave it unbounded on one side, quantized samples confine it to a
bin. The full constraint set is therefore a box (a product of closed
intervals, possibly unbounded), so the Euclidean projection is an
element-wise clamp, and the squared distance to the set and its gradient
follow directly from the projection difference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch

# Absolute tolerance when validating that an observation sits on a
# representable quantizer level.
LEVEL_TOL = 1e-9


def _as_vector(x, name: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class IntervalSet:
    """Per-sample interval constraints ``[lower[i], upper[i]]``.

    ``lower`` may contain ``-inf`` and ``upper`` may contain ``+inf``;
    ``lower[i] == upper[i]`` encodes an exactly-known sample. Instances are
    immutable (the stored arrays are read-only copies), so they are safe to
    share between threads.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _as_vector(self.lower, "lower").copy()
        hi = _as_vector(self.upper, "upper").copy()
        if lo.shape != hi.shape:
            raise DimensionMismatch(
                f"lower and upper differ in length: {lo.shape[0]} vs {hi.shape[0]}"
            )
        if np.isnan(lo).any() or np.isnan(hi).any():
            raise ValueError("interval bounds must not be NaN")
        if (lo > hi).any():
            raise ValueError("each interval must satisfy lower <= upper")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def __len__(self) -> int:
        return self.lower.shape[0]

    def _check_length(self, x: np.ndarray) -> None:
        if x.shape[0] != len(self):
            raise DimensionMismatch(
                f"vector of length {x.shape[0]} does not match set of length {len(self)}"
            )

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def from_clipping(cls, y, theta_plus: float, theta_minus: float) -> "IntervalSet":
        """Constraint set consistent with ``y = clip(x, theta_plus, theta_minus)``.

        Samples equal to ``theta_plus`` are upper-saturated and map to
        ``[theta_plus, +inf)``, samples equal to ``theta_minus`` map to
        ``(-inf, theta_minus]``, everything else is exactly known. Saturation
        detection uses exact equality: the clipper emits the threshold values
        exactly, so a tolerance of zero is correct here.
        """
        y = _as_vector(y, "y")
        theta_plus = float(theta_plus)
        theta_minus = float(theta_minus)
        if not theta_plus > theta_minus:
            raise ValueError(
                f"theta_plus must exceed theta_minus, got {theta_plus} <= {theta_minus}"
            )
        if (y > theta_plus).any() or (y < theta_minus).any():
            raise ValueError("observation contains samples outside the clipping range")
        lower = y.copy()
        upper = y.copy()
        upper[y == theta_plus] = np.inf
        lower[y == theta_minus] = -np.inf
        return cls(lower, upper)

    @classmethod
    def from_quantization(cls, y, delta: float, saturation: float) -> "IntervalSet":
        """Constraint set consistent with a uniform midriser quantizer.

        ``y`` must consist of reconstruction levels, i.e. odd multiples of
        ``delta / 2`` no larger in magnitude than ``saturation - delta / 2``
        (validated to within ``LEVEL_TOL``). Interior levels map to the closed
        bin ``[y - delta/2, y + delta/2]``; the outermost levels absorb the
        saturated tail and are unbounded on the outer side.
        """
        y = _as_vector(y, "y")
        delta = float(delta)
        saturation = float(saturation)
        if delta <= 0.0:
            raise ValueError("delta must be positive")
        top = saturation - delta / 2.0
        if top < 0.0:
            raise ValueError("saturation must be at least delta / 2")
        level = delta * (np.floor(y / delta) + 0.5)
        np.clip(level, -top, top, out=level)
        if (np.abs(y - level) > LEVEL_TOL).any():
            bad = int(np.argmax(np.abs(y - level)))
            raise ValueError(
                f"y[{bad}] = {y[bad]!r} is not a representable level for "
                f"delta={delta}, saturation={saturation}"
            )
        lower = y - delta / 2.0
        upper = y + delta / 2.0
        upper[y >= top - LEVEL_TOL] = np.inf
        lower[y <= -top + LEVEL_TOL] = -np.inf
        return cls(lower, upper)

    @classmethod
    def singleton(cls, x) -> "IntervalSet":
        """Degenerate set ``{x}``: every sample exactly known."""
        x = _as_vector(x)
        if not np.isfinite(x).all():
            raise ValueError("singleton set requires a finite vector")
        return cls(x, x)

    # ------------------------------------------------------------------
    # geometry

    def project(self, x) -> np.ndarray:
        """Euclidean projection onto the set: an element-wise clamp."""
        x = _as_vector(x)
        self._check_length(x)
        return np.minimum(self.upper, np.maximum(self.lower, x))

    def distance_sq(self, x) -> float:
        """Squared Euclidean distance from ``x`` to the set."""
        x = _as_vector(x)
        self._check_length(x)
        diff = x - self.project(x)
        return float(diff @ diff)

    def grad_half_distance_sq(self, x) -> np.ndarray:
        """Gradient of ``0.5 * distance_sq`` at ``x``, i.e. ``x - project(x)``."""
        x = _as_vector(x)
        self._check_length(x)
        return x - self.project(x)

    def contains(self, x, tol: float = 0.0) -> bool:
        """Whether ``x`` lies in the set, loosened by ``tol`` on each side."""
        if tol < 0.0:
            raise ValueError("tol must be non-negative")
        x = _as_vector(x)
        self._check_length(x)
        return bool(((x >= self.lower - tol) & (x <= self.upper + tol)).all())

    # ------------------------------------------------------------------
    # serialization

    def to_json_obj(self) -> dict:
        """JSON-safe representation; infinities become "inf"/"-inf" strings."""
        return {
            "lower": [_encode_bound(v) for v in self.lower],
            "upper": [_encode_bound(v) for v in self.upper],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "IntervalSet":
        lower = [_decode_bound(v) for v in obj["lower"]]
        upper = [_decode_bound(v) for v in obj["upper"]]
        return cls(np.array(lower), np.array(upper))


def _encode_bound(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def _decode_bound(v) -> float:
    if isinstance(v, str):
        if v == "inf":
            return math.inf
        if v == "-inf":
            return -math.inf
        raise ValueError(f"unrecognized bound encoding {v!r}")
    return float(v)
