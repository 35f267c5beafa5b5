"""Lipschitz functions vanishing at the base point.

Besides the Lipschitz norm this module tabulates two flatness moduli that
stand in, on a finite space, for the small-scale condition defining the
little Lipschitz space and for the tail condition at infinity:

* ``flatness_at_scale(f, delta)``: largest quotient over pairs closer than delta;
* ``tail_flatness(f, r)``: largest quotient over pairs leaving the closed ball B(0, r).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from lipfree.errors import StructuralInputError
from lipfree.metric_core import TAU_METRIC, PointedMetricSpace


@dataclass(frozen=True, eq=False)
class LipFunction:
    space: PointedMetricSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.space.n,):
            raise StructuralInputError(f"expected {self.space.n} values, got shape {v.shape}")
        if v[0] != 0.0:
            raise StructuralInputError(f"function must vanish at the base point, got f(0) = {v[0]!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def normalized(cls, space: PointedMetricSpace, values) -> "LipFunction":
        """Shift arbitrary values so they vanish at the base point."""
        v = np.asarray(values, dtype=float)
        return cls(space, v - v[0])

    @classmethod
    def zero(cls, space: PointedMetricSpace) -> "LipFunction":
        return cls(space, np.zeros(space.n))

    def __call__(self, i: int) -> float:
        return float(self.values[i])

    def __add__(self, other: "LipFunction") -> "LipFunction":
        _same_space(self, other)
        return LipFunction(self.space, self.values + other.values)

    def __sub__(self, other: "LipFunction") -> "LipFunction":
        _same_space(self, other)
        return LipFunction(self.space, self.values - other.values)

    def __mul__(self, c: float) -> "LipFunction":
        return LipFunction(self.space, float(c) * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "LipFunction":
        return LipFunction(self.space, -self.values)

    def __eq__(self, other):
        if not isinstance(other, LipFunction):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"LipFunction({self.values.tolist()})"


def _same_space(f: LipFunction, g: LipFunction) -> None:
    if f.space is not g.space and f.space != g.space:
        raise StructuralInputError("functions live on different spaces")


def difference_quotients(f: LipFunction) -> np.ndarray:
    """Signed quotients (f(i) - f(j)) / d(i, j); NaN on the diagonal and on
    pairs closer than TAU_METRIC."""
    d = f.space.dist
    num = f.values[:, None] - f.values[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = num / d
    q[d < TAU_METRIC] = np.nan
    return q


def _masked_max(q: np.ndarray, mask: np.ndarray):
    a = np.where(mask & ~np.isnan(q), np.abs(q), -1.0)
    k = int(np.argmax(a))  # row-major argmax: lexicographically first maximizer
    if a.flat[k] < 0:
        return 0.0, None
    i, j = divmod(k, a.shape[1])
    return float(a.flat[k]), (i, j)


def lip_constant(f: LipFunction):
    """Best Lipschitz constant and a pair attaining it.

    Returns ``(value, (i, j))`` with i < j chosen lexicographically first
    among maximizers; ``(0.0, None)`` on a one-point space.
    """
    n = f.space.n
    if n < 2:
        return 0.0, None
    q = difference_quotients(f)
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    value, pair = _masked_max(q, upper)
    if value == 0.0:
        # all quotients vanish; report the first admissible pair for determinism
        cand = np.argwhere(upper & ~np.isnan(q))
        pair = tuple(int(v) for v in cand[0]) if len(cand) else None
    return value, pair


def flatness_at_scale(f: LipFunction, delta: float) -> float:
    """sup |f(i)-f(j)|/d(i,j) over pairs with 0 < d(i,j) < delta (0 if none)."""
    q = difference_quotients(f)
    return _masked_max(q, f.space.dist < delta)[0]


def tail_flatness(f: LipFunction, r: float) -> float:
    """sup of |quotient| over pairs with at least one point outside the closed ball B(0, r)."""
    outside = f.space.dist[0] > r
    mask = outside[:, None] | outside[None, :]
    return _masked_max(difference_quotients(f), mask)[0]


def pointwise_min(f: LipFunction, g: LipFunction) -> LipFunction:
    _same_space(f, g)
    return LipFunction(f.space, np.minimum(f.values, g.values))


def pointwise_max(f: LipFunction, g: LipFunction) -> LipFunction:
    _same_space(f, g)
    return LipFunction(f.space, np.maximum(f.values, g.values))


@dataclass(frozen=True)
class FlatnessProfile:
    """Flatness moduli sampled at every realized positive distance.

    ``small_scale[k]`` is the sup of |quotient| over pairs with
    d <= scale_points[k] (nondecreasing); ``tail[k]`` is
    ``tail_flatness(f, scale_points[k])`` (nonincreasing).
    """

    scale_points: tuple
    small_scale: tuple
    tail: tuple


def flatness_profile(f: LipFunction, scales: Optional[np.ndarray] = None) -> FlatnessProfile:
    space = f.space
    pts = space.positive_distances() if scales is None else np.sort(np.asarray(scales, dtype=float))
    q = difference_quotients(f)
    small, tail = [], []
    for s in pts:
        small.append(_masked_max(q, space.dist <= s)[0])
        tail.append(tail_flatness(f, s))
    return FlatnessProfile(tuple(float(s) for s in pts), tuple(small), tuple(tail))
