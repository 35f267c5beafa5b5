"""Finite pointed metric spaces: validation, balls, annuli and the
finite-scale accumulation derivative.

The base point is always index 0 of the distance matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations, permutations
from typing import Optional, Sequence

import numpy as np

from lipfree.errors import PreconditionError, StructuralInputError

TAU_METRIC = 1e-9

PointSet = tuple  # sorted, duplicate-free tuple of point indices


def point_set(indices) -> PointSet:
    return tuple(sorted({int(i) for i in indices}))


@dataclass(frozen=True, eq=False)
class PointedMetricSpace:
    dist: np.ndarray
    labels: tuple = field(default=())

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
            raise StructuralInputError(f"distance matrix must be square and non-empty, got shape {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        labels = tuple(str(l) for l in self.labels) if self.labels else tuple(str(i) for i in range(d.shape[0]))
        if len(labels) != d.shape[0]:
            raise StructuralInputError(f"{len(labels)} labels for {d.shape[0]} points")
        if len(set(labels)) != len(labels):
            raise StructuralInputError("labels must be unique")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def base(self) -> int:
        return 0

    def index(self, label) -> int:
        """Resolve a label (or an integer index) to a point index."""
        if isinstance(label, (int, np.integer)):
            if not 0 <= label < self.n:
                raise StructuralInputError(f"point index {label} out of range")
            return int(label)
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise StructuralInputError(f"unknown point label {label!r}") from None

    def d(self, i: int, j: int) -> float:
        return float(self.dist[i, j])

    def all_points(self) -> PointSet:
        return tuple(range(self.n))

    def positive_distances(self) -> np.ndarray:
        """Sorted distinct positive distances realized in the space."""
        iu = np.triu_indices(self.n, 1)
        vals = self.dist[iu]
        return np.unique(vals[vals > 0])

    def diameter(self) -> float:
        return float(self.dist.max()) if self.n > 1 else 0.0

    def __eq__(self, other):
        if not isinstance(other, PointedMetricSpace):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.dist, other.dist)

    def __hash__(self):
        return hash((self.labels, self.dist.tobytes()))

    def __repr__(self):
        return f"PointedMetricSpace(n={self.n}, labels={list(self.labels)})"


@dataclass(frozen=True)
class ViolationReport:
    """Outcome of validate_metric. Each witness is (kind, indices, slack)."""

    valid: bool
    witnesses: tuple = ()


def validate_metric(space: PointedMetricSpace, tol: float = TAU_METRIC) -> ViolationReport:
    d = space.dist
    n = space.n
    witnesses = []
    for i in range(n):
        if abs(d[i, i]) > tol:
            witnesses.append(("identity", (i, i), float(d[i, i])))
    for i, j in combinations(range(n), 2):
        if abs(d[i, j] - d[j, i]) > tol:
            witnesses.append(("symmetry", (i, j), float(d[i, j] - d[j, i])))
        if d[i, j] <= tol or d[j, i] <= tol:
            witnesses.append(("positivity", (i, j), float(min(d[i, j], d[j, i]))))
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        bad = np.argwhere(~np.isfinite(d) | (d < 0))
        for i, j in bad:
            witnesses.append(("nonnegativity", (int(i), int(j)), float(d[i, j])))
    # d[i,k] - (d[i,j] + d[j,k]) over all triples, vectorized on the middle point
    for j in range(n):
        slack = d - (d[:, j][:, None] + d[j, :][None, :])
        for i, k in np.argwhere(slack > tol):
            if len({int(i), j, int(k)}) == 3:
                witnesses.append(("triangle", (int(i), j, int(k)), float(slack[i, k])))
    return ViolationReport(valid=not witnesses, witnesses=tuple(witnesses))


def is_ultrametric(space: PointedMetricSpace, tol: float = TAU_METRIC):
    """Strong triangle inequality check.

    Returns ``(True, None)`` or ``(False, ((i, j, k), slack))`` where the
    witness violates d(i,k) <= max(d(i,j), d(j,k)) by ``slack``.
    """
    d = space.dist
    for j in range(space.n):
        slack = d - np.maximum(d[:, j][:, None], d[j, :][None, :])
        bad = np.argwhere(slack > tol)
        if len(bad):
            i, k = (int(v) for v in bad[0])
            return False, ((i, j, k), float(slack[i, k]))
    return True, None


def four_point_property(space: PointedMetricSpace, tol: float = TAU_METRIC):
    """Buneman's condition d(x,y)+d(z,t) <= max(d(x,z)+d(y,t), d(x,t)+d(y,z)).

    Returns ``(True, None)`` or ``(False, ((x, y, z, t), slack))``.
    """
    d = space.dist
    n = space.n
    for x, y in permutations(range(n), 2):
        lhs = d[x, y] + d
        rhs = np.maximum(d[x][:, None] + d[y][None, :], d[x][None, :] + d[y][:, None])
        slack = lhs - rhs
        for z, t in np.argwhere(slack > tol):
            if len({x, y, int(z), int(t)}) == 4:
                return False, ((x, y, int(z), int(t)), float(slack[z, t]))
    return True, None


def closed_ball(space: PointedMetricSpace, center: int, r: float) -> PointSet:
    if r < 0:
        raise PreconditionError("closed ball radius must be >= 0")
    return tuple(int(i) for i in np.flatnonzero(space.dist[center] <= r))


def open_ball(space: PointedMetricSpace, center: int, r: float) -> PointSet:
    if r <= 0:
        raise PreconditionError("open ball radius must be > 0")
    return tuple(int(i) for i in np.flatnonzero(space.dist[center] < r))


def annulus(space: PointedMetricSpace, N: int) -> PointSet:
    """Closed ball of radius 2^(N+1) at the base minus the open ball of
    radius 2^(-N-1), with the base point put back."""
    if N < 0:
        raise PreconditionError("annulus index must be a nonnegative integer")
    row = space.dist[0]
    keep = (row <= 2.0 ** (N + 1)) & ~(row < 2.0 ** (-N - 1))
    keep[0] = True
    return tuple(int(i) for i in np.flatnonzero(keep))


def accumulation_derivative(space: PointedMetricSpace, subset: Sequence[int], delta: float) -> PointSet:
    """Points of ``subset`` having another point of ``subset`` closer than ``delta``.

    Finite-resolution stand-in for the set of accumulation points. Applying
    it a second time returns the same set.
    """
    if delta <= 0:
        raise PreconditionError("delta must be > 0")
    idx = np.array(point_set(subset), dtype=int)
    if idx.size == 0:
        return ()
    sub = space.dist[np.ix_(idx, idx)]
    close = sub < delta
    np.fill_diagonal(close, False)
    return tuple(int(i) for i in idx[close.any(axis=1)])


def restrict(space: PointedMetricSpace, subset: Sequence[int]) -> PointedMetricSpace:
    idx = point_set(subset)
    if not idx or idx[0] != 0:
        raise PreconditionError("restriction must keep the base point")
    sel = np.array(idx, dtype=int)
    return PointedMetricSpace(space.dist[np.ix_(sel, sel)], labels=tuple(space.labels[i] for i in idx))


def from_points(coords, labels: Optional[Sequence[str]] = None, ord=2) -> PointedMetricSpace:
    """Metric space induced by a norm on coordinates; row 0 is the base."""
    pts = np.asarray(coords, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.linalg.norm(diff, ord=ord, axis=-1)
    return PointedMetricSpace(dist, labels=tuple(labels) if labels else ())
