"""Finite-rank projections on ultrametric spaces.

A ball partition splits the closed ball B(0, n) into closed balls of radius
r. The operator L sends f to the function constant on each block, equal to
f at the block representative and 0 outside B(0, n); its adjoint R moves
every point mass to its representative and drops mass outside the horizon
(and mass landing on the base point, which pairs to zero with everything).
On an ultrametric space L never increases the Lipschitz constant.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from lipfree.errors import PreconditionError, StructuralInputError
from lipfree.free_norm import FreeVector, free_norm
from lipfree.lipschitz import LipFunction, lip_constant
from lipfree.metric_core import PointedMetricSpace, is_ultrametric

OUTSIDE = -1


@dataclass(frozen=True)
class BallPartition:
    space: PointedMetricSpace
    radius: float
    horizon: float
    representatives: tuple
    assignment: tuple  # representative index per point, OUTSIDE beyond the horizon

    def blocks(self) -> dict:
        out = {rep: [] for rep in self.representatives}
        for z, rep in enumerate(self.assignment):
            if rep != OUTSIDE:
                out[rep].append(z)
        return {rep: tuple(pts) for rep, pts in out.items()}

    def block_of(self, z: int) -> int:
        return self.assignment[z]


def ball_partition(space: PointedMetricSpace, r: float, n: float) -> BallPartition:
    """Partition of the closed ball B(0, n) into closed r-balls.

    Blocks are scanned in index order, so the base point represents its own
    block and every other block is represented by its smallest index.
    """
    if r <= 0 or n <= 0:
        raise PreconditionError("radius and horizon must be positive")
    ok, witness = is_ultrametric(space)
    if not ok:
        raise PreconditionError(f"ball partition needs an ultrametric space, witness {witness}")
    d = space.dist
    inside = d[0] <= n
    assignment = np.full(space.n, OUTSIDE)
    reps = []
    for z in range(space.n):
        if not inside[z] or assignment[z] != OUTSIDE:
            continue
        reps.append(z)
        members = inside & (d[z] <= r)
        if np.any(assignment[members] != OUTSIDE):
            raise PreconditionError("closed balls overlap; partition is not disjoint")
        assignment[members] = z
    return BallPartition(
        space=space,
        radius=float(r),
        horizon=float(n),
        representatives=tuple(reps),
        assignment=tuple(int(v) for v in assignment),
    )


def _check(space_a: PointedMetricSpace, space_b: PointedMetricSpace):
    if space_a is not space_b and space_a != space_b:
        raise StructuralInputError("operands live on different spaces")


def project_function(f: LipFunction, P: BallPartition) -> LipFunction:
    _check(f.space, P.space)
    assign = np.array(P.assignment)
    vals = np.where(assign == OUTSIDE, 0.0, f.values[np.maximum(assign, 0)])
    return LipFunction(f.space, vals)


def project_measure(mu: FreeVector, P: BallPartition) -> FreeVector:
    _check(mu.space, P.space)
    out = {}
    for z, a in mu.masses.items():
        rep = P.assignment[z]
        if rep == OUTSIDE or rep == 0:
            continue  # both are the zero element: every f vanishes at the base
        out[rep] = out.get(rep, 0.0) + a
    return FreeVector(mu.space, out)


@dataclass(frozen=True)
class ProjectionReport:
    lip_in: float
    lip_out: float
    ratio: float
    case: str  # "same-block", "cross-block", "inside-outside", "outside-outside" or "none"
    pair: tuple | None
    count: int = 0


def classify_pair(P: BallPartition, i: int, j: int) -> str:
    bi, bj = P.assignment[i], P.assignment[j]
    if bi == OUTSIDE and bj == OUTSIDE:
        return "outside-outside"
    if bi == OUTSIDE or bj == OUTSIDE:
        return "inside-outside"
    return "same-block" if bi == bj else "cross-block"


def contraction_certificate(P: BallPartition, fs: Sequence[LipFunction]) -> ProjectionReport:
    """Largest ratio lip(L f) / lip(f) over ``fs`` and the pair attaining lip(L f)."""
    if len(fs) == 0:
        return ProjectionReport(0.0, 0.0, 0.0, "none", None, 0)
    best = None
    for f in fs:
        lip_in = lip_constant(f)[0]
        lip_out, pair = lip_constant(project_function(f, P))
        ratio = lip_out / lip_in if lip_in > 0 else 0.0
        if best is None or ratio > best[2]:
            best = (lip_in, lip_out, ratio, pair)
    lip_in, lip_out, ratio, pair = best
    case = classify_pair(P, *pair) if pair is not None and lip_out > 0 else "none"
    return ProjectionReport(lip_in, lip_out, ratio, case, pair, len(fs))


def coupled_schedule(horizons: Iterable[int] = range(1, 9)) -> list:
    """Default schedule pairing radius 1/n with horizon n."""
    return [(1.0 / n, float(n)) for n in horizons]


def convergence_experiment(space: PointedMetricSpace, mu: FreeVector, schedule=None) -> list:
    """Rows (r, n, err, bound) with err = ||R mu - mu|| in the free space.

    ``bound`` is r * sum|masses| when the support lies in B(0, n) and None
    otherwise (mass beyond the horizon is dropped, so no such bound applies).
    """
    if schedule is None:
        schedule = coupled_schedule()
    ok, witness = is_ultrametric(space)
    if not ok:
        raise PreconditionError(f"convergence experiment needs an ultrametric space, witness {witness}")
    rows = []
    for r, n in schedule:
        P = ball_partition(space, r, n)
        err = free_norm(project_measure(mu, P) - mu).value
        inside = all(space.d(0, z) <= n for z in mu.support())
        bound = r * mu.l1() if inside else None
        rows.append((float(r), float(n), err, bound))
    return rows
