"""Critical-value ladders and the standardizing maps built from them.

Each stream carries 2K critical values

    A_1 <= A_2 <= ... <= A_K < B_K <= ... <= B_1

and its raw statistic is pushed through an increasing piecewise-linear map
that sends A_s to -(K-s+1) and B_s to K-s+1, so statistics from different
tests can be ranked on one common scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LadderError


def _readonly(values, name):
    arr = np.array(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise LadderError(f"{name} must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise LadderError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CriticalLadder:
    """Lower (A_1..A_K) and upper (B_1..B_K) critical values for one stream."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = _readonly(self.lower, "lower")
        upper = _readonly(self.upper, "upper")
        if lower.size != upper.size:
            raise LadderError(
                f"lower has {lower.size} values but upper has {upper.size}"
            )
        if np.any(np.diff(lower) < 0):
            raise LadderError("lower critical values must be non-decreasing in s")
        if np.any(np.diff(upper) > 0):
            raise LadderError("upper critical values must be non-increasing in s")
        if not lower[-1] < upper[-1]:
            raise LadderError(
                f"A_K={lower[-1]:.6g} must be strictly below B_K={upper[-1]:.6g}"
            )
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def K(self):
        return self.lower.size

    def __eq__(self, other):
        if not isinstance(other, CriticalLadder):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(
            self.upper, other.upper
        )

    def rejective(self):
        """Drop the lower boundaries."""
        return RejectiveLadder(self.upper)


@dataclass(frozen=True, eq=False)
class RejectiveLadder:
    """Upper critical values B_1 >= ... >= B_K for the reject-only procedure."""

    upper: np.ndarray

    def __post_init__(self):
        upper = _readonly(self.upper, "upper")
        if np.any(np.diff(upper) > 0):
            raise LadderError("upper critical values must be non-increasing in s")
        object.__setattr__(self, "upper", upper)

    @property
    def K(self):
        return self.upper.size

    def __eq__(self, other):
        if not isinstance(other, RejectiveLadder):
            return NotImplemented
        return np.array_equal(self.upper, other.upper)


class Standardizer:
    """Strictly increasing piecewise-linear map with unit outer slopes.

    Knots are ``(raw, standardized)`` pairs with raw values non-decreasing and
    standardized values strictly increasing.  Several knots may share a raw
    value (a ladder with A_{s+1} == A_s); the zero-width piece between them is
    skipped and the map jumps there.  At such a point the map takes the value
    farthest from zero, so a statistic sitting on a shared critical value is
    counted as crossing every boundary located there.
    """

    def __init__(self, knots):
        xs = np.array([k[0] for k in knots], dtype=float)
        ys = np.array([k[1] for k in knots], dtype=float)
        if xs.size == 0:
            raise LadderError("standardizer needs at least one knot")
        if np.any(np.diff(xs) < 0):
            raise LadderError("knot raw values must be non-decreasing")
        if np.any(np.diff(ys) <= 0):
            raise LadderError("knot standardized values must be strictly increasing")
        self.knots = tuple(zip(xs.tolist(), ys.tolist()))

        ux, first = np.unique(xs, return_index=True)
        last = np.append(first[1:], xs.size) - 1
        self._x = ux
        self._y_left = ys[first]  # value approached from the left
        self._y_right = ys[last]  # value the next piece starts from
        self._y_at = np.where(
            np.abs(ys[first]) >= np.abs(ys[last]), ys[first], ys[last]
        )

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        if np.any(np.isnan(x)):
            raise ValueError("cannot standardize NaN")
        ux = self._x
        out = np.empty_like(x)

        below = x < ux[0]
        above = x > ux[-1]
        out[below] = self._y_left[0] + (x[below] - ux[0])
        out[above] = self._y_right[-1] + (x[above] - ux[-1])

        inside = ~(below | above)
        xi = x[inside]
        j = np.searchsorted(ux, xi, side="right") - 1
        on_knot = ux[j] == xi
        jn = np.minimum(j + 1, ux.size - 1)
        width = ux[jn] - ux[j]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(on_knot, 0.0, (xi - ux[j]) / width)
        interp = self._y_right[j] + frac * (self._y_left[jn] - self._y_right[j])
        out[inside] = np.where(on_knot, self._y_at[j], interp)

        return float(out[0]) if scalar else out

    def __repr__(self):
        return f"Standardizer(knots={self.knots!r})"


def build_full_standardizer(ladder, K=None):
    """Standardizing map for the accept/reject procedure.

    Sends A_s to -(K-s+1) and B_s to K-s+1; the middle piece between A_K and
    B_K is ``2(x - A_K)/(B_K - A_K) - 1``.
    """
    if not isinstance(ladder, CriticalLadder):
        raise LadderError("build_full_standardizer needs a CriticalLadder")
    K = ladder.K if K is None else int(K)
    if K != ladder.K:
        raise LadderError(f"ladder has {ladder.K} levels, expected K={K}")
    levels = np.arange(K, 0, -1, dtype=float)  # K-s+1 for s = 1..K
    knots = list(zip(ladder.lower, -levels))
    knots += list(zip(ladder.upper[::-1], levels[::-1]))
    return Standardizer(knots)


def build_rejective_standardizer(ladder, K=None):
    """Standardizing map for the reject-only procedure, B_s -> K-s+1."""
    if isinstance(ladder, CriticalLadder):
        ladder = ladder.rejective()
    if not isinstance(ladder, RejectiveLadder):
        raise LadderError("build_rejective_standardizer needs a RejectiveLadder")
    K = ladder.K if K is None else int(K)
    if K != ladder.K:
        raise LadderError(f"ladder has {ladder.K} levels, expected K={K}")
    levels = np.arange(K, 0, -1, dtype=float)
    return Standardizer(list(zip(ladder.upper[::-1], levels[::-1])))
