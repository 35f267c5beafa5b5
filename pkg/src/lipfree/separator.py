"""Functions separating a pair of points with controlled Lipschitz constant.

Two constructions are provided.

``ultrametric_separator`` is the scaled ball indicator
``h = a * (1_B(x, a/2) - 1_B(x, a/2)(0))`` with a = d(x, y); on an
ultrametric space it is 2-Lipschitz and locally constant at scale a/2.

``proper_separator`` works on any finite metric space. It composes the
distance to x with a piecewise-linear profile phi that is constant on a
family of open "plateaus" and affine in between:

* step 1 puts plateaus around 0, around every candidate level in (0, a/2],
  around [a/2, a] (value a/2), around every level w in [a, 3a/2]
  (value 3a/2 - w) and on the tail beyond 3a/2 (value 0), all with
  half-width u_1/4 where u_1 is the smallest gap between levels and the
  landmarks 0, a/2, a, 3a/2;
* step j >= 2 keeps every existing plateau and adds new ones of half-width
  u_j / 2**(j+1) around the levels of points still outside all plateaus,
  where u_j is the smallest gap between new levels and existing plateau
  edges (bounded by u_{j-1}).

Inserting flat pieces of total width at most u_j / 2**j into affine pieces of
length at least u_j multiplies slopes by at most 1 + 1/(2**j - 1), so after n
steps the profile is prod_{j<=n} (1 + 1/(2**j - 1))-Lipschitz and
``h = 2 * (phi(d(., x)) - phi(d(0, x)))`` satisfies |h(x) - h(y)| = a.

All plateau arithmetic is exact (``fractions.Fraction``; every float
distance is a dyadic rational), so slope bounds and plateau equalities hold
without rounding slack. Floats appear only in the returned function.

Candidate levels at each step come from the points still off-plateau: those
with a neighbour closer than ``resolution`` first, all of them otherwise.
The loop stops once at most ``stop_size`` points remain off-plateau.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from lipfree.errors import ConstructionError, DegenerateInputError, PreconditionError
from lipfree.lipschitz import LipFunction, flatness_at_scale, lip_constant
from lipfree.metric_core import (
    PointedMetricSpace,
    accumulation_derivative,
    is_ultrametric,
    open_ball,
)

# 2 * prod_{j>=1} (1 + 1/(2^j - 1)), i.e. 2 / prod_{j>=1} (1 - 2^-j).
SEPARATION_CONSTANT = 6.925493238910127
# Rigorous bound on |SEPARATION_CONSTANT - true value| (partial product to
# j = 200 evaluated at 50 digits, tail factor below exp(2^-199)).
SEPARATION_CONSTANT_ERROR = 1e-15

INF = math.inf


def step_bound_exact(j: int) -> Fraction:
    """prod_{i=1}^{j} (1 + 1/(2^i - 1)) = prod 2^i / (2^i - 1), exactly."""
    p = Fraction(1)
    for i in range(1, j + 1):
        p *= Fraction(2**i, 2**i - 1)
    return p


def step_bound(j: int) -> float:
    """Slope bound of the step-j profile, rounded up to a float."""
    return _float_up(step_bound_exact(j))


def c_bound(iterations: int) -> float:
    """2 * prod_{j=1}^{iterations} (1 + 1/(2^j - 1)), rounded up to a float."""
    return _float_up(2 * step_bound_exact(iterations))


def _float_up(q: Fraction) -> float:
    f = float(q)
    return math.nextafter(f, INF) if Fraction(f) < q else f


def _float_down(q: Fraction) -> float:
    f = float(q)
    return math.nextafter(f, -INF) if Fraction(f) > q else f


@dataclass(frozen=True)
class Plateau:
    lo: Fraction  # open interval (lo, hi); lo < 0 for the plateau containing 0
    hi: Fraction | float  # math.inf for the tail plateau
    value: Fraction
    kind: str  # "U" or "W"
    index: int
    step: int

    def contains(self, t: float) -> bool:
        return self.lo < t < self.hi

    def closure_contains(self, t: float) -> bool:
        return self.lo <= t <= self.hi


@dataclass(frozen=True)
class LevelDecomposition:
    a: Fraction
    step: int
    u_levels: tuple
    v_levels: tuple
    w_levels: tuple
    u_gap: Fraction
    intervals: tuple  # (kind, index, (lo, hi), value)
    endpoint_hits: tuple = ()  # levels landing exactly on an existing plateau edge

    @property
    def half_width(self) -> Fraction:
        return self.u_gap / 4 if self.step == 1 else self.u_gap / 2 ** (self.step + 1)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous profile on [0, inf), affine between breakpoints and
    constant beyond the last one. Breakpoints and values are exact rationals."""

    breakpoints: tuple
    values: tuple
    plateaus: tuple = ()
    step: int = 0
    u_gap: Fraction = Fraction(0)
    a: Fraction = Fraction(0)

    def exact(self, t) -> Fraction:
        t = Fraction(t)
        b, v = self.breakpoints, self.values
        k = bisect.bisect_right(b, t)
        if k == 0:
            return v[0]
        if k == len(b):
            return v[-1]
        return v[k - 1] + (v[k] - v[k - 1]) * (t - b[k - 1]) / (b[k] - b[k - 1])

    def __call__(self, t):
        if np.ndim(t):
            return np.array([float(self.exact(s)) for s in np.asarray(t).ravel()]).reshape(np.shape(t))
        return float(self.exact(t))

    def slopes(self) -> list:
        b, v = self.breakpoints, self.values
        return [(v[k + 1] - v[k]) / (b[k + 1] - b[k]) for k in range(len(b) - 1)]

    def lipschitz_exact(self) -> Fraction:
        return max((abs(s) for s in self.slopes()), default=Fraction(0))

    def lipschitz(self) -> float:
        return _float_up(self.lipschitz_exact())

    def in_plateau(self, t) -> bool:
        t = Fraction(t)
        return any(p.contains(t) for p in self.plateaus)

    def in_closed_plateau(self, t) -> bool:
        t = Fraction(t)
        return any(p.closure_contains(t) for p in self.plateaus)

    def gaps(self):
        """Open intervals between consecutive plateaus, as (left edge, right edge)."""
        ps = self.plateaus
        return [(ps[i].hi, ps[i + 1].lo) for i in range(len(ps) - 1)]


@dataclass(frozen=True)
class SeparatorResult:
    h: LipFunction
    x: int
    y: int
    method: str
    lip_bound: float
    flat_radius: float
    flat_inclusive: bool  # True: d(z,t) <= radius forces h(z)=h(t); False: strict <
    iterations: int
    c_bound: float
    phi: Optional[PiecewiseLinear] = None
    levels: tuple = ()
    off_plateau_sizes: tuple = ()  # |C_k| after each step
    diagnostics: dict = field(default_factory=dict)

    @property
    def equality_residual(self) -> float:
        a = self.h.space.d(self.x, self.y)
        return abs(abs(self.h(self.x) - self.h(self.y)) - a)


def _check_pair(space: PointedMetricSpace, x: int, y: int):
    if x == y:
        raise DegenerateInputError("separator needs two distinct points")
    if not (0 <= x < space.n and 0 <= y < space.n):
        raise PreconditionError("point index out of range")


def ultrametric_separator(space: PointedMetricSpace, x: int, y: int) -> SeparatorResult:
    _check_pair(space, x, y)
    ok, witness = is_ultrametric(space)
    if not ok:
        raise PreconditionError(f"space is not ultrametric, witness {witness}")
    a = space.d(x, y)
    ball = np.zeros(space.n)
    ball[list(open_ball(space, x, a / 2.0))] = 1.0
    h = LipFunction(space, a * (ball - ball[0]))
    return SeparatorResult(
        h=h,
        x=x,
        y=y,
        method="ultrametric",
        lip_bound=2.0,
        flat_radius=a / 2.0,
        flat_inclusive=False,
        iterations=0,
        c_bound=c_bound(0),
    )


def _min_positive(values: Iterable[Fraction]):
    vals = [v for v in values if v > 0]
    return min(vals) if vals else None


def _diffs(seq) -> list:
    return [seq[i + 1] - seq[i] for i in range(len(seq) - 1)]


def level_decomposition(
    space: PointedMetricSpace,
    x: int,
    y: int,
    candidates: Sequence[int],
    previous: Optional[PiecewiseLinear] = None,
) -> LevelDecomposition:
    """Classify the distances from x to ``candidates`` and compute the gap u_j.

    Without ``previous`` this is the first step: levels are split into
    u (<= a/2), v (in (a/2, a)) and w (in [a, 3a/2]) chains, levels beyond
    3a/2 are ignored, and u_1 is the least positive entry among a/2, the
    first u-level, a/2 minus the last u-level, the first w-level minus a,
    3a/2 minus the last w-level and consecutive differences in each chain.

    With ``previous`` (step j >= 2) the candidates must lie off every open
    plateau; u_j is the least positive entry among u_{j-1}, the distances
    from each level to the two edges of the gap holding it, and the
    consecutive differences of levels.
    """
    _check_pair(space, x, y)
    if len(candidates) == 0:
        raise DegenerateInputError("empty candidate set")
    a = Fraction(space.d(x, y))
    raw = sorted({Fraction(space.d(x, int(z))) for z in candidates})
    if all(t == 0 for t in raw):
        raise DegenerateInputError("all candidate distances are zero")
    levels = [t for t in raw if t <= 3 * a / 2]
    u = tuple(t for t in levels if t <= a / 2)
    v = tuple(t for t in levels if a / 2 < t < a)
    w = tuple(t for t in levels if a <= t)

    hits = []
    if previous is None:
        step = 1
        terms = [a / 2]
        if u:
            terms += [u[0], a / 2 - u[-1]]
            terms += _diffs(u)
        if w:
            terms += [w[0] - a, 3 * a / 2 - w[-1]]
            terms += _diffs(w)
        gap = _min_positive(terms)
        q = gap / 4
        intervals = [("U", 0, (-q, q), Fraction(0))]
        intervals += [("U", i + 1, (t - q, t + q), t) for i, t in enumerate(u)]
        intervals += [("W", 0, (a / 2 - q, a + q), a / 2)]
        intervals += [("W", i + 1, (t - q, t + q), 3 * a / 2 - t) for i, t in enumerate(w)]
        intervals += [("W", len(w) + 1, (3 * a / 2 - q, INF), Fraction(0))]
    else:
        step = previous.step + 1
        terms = [previous.u_gap]
        gaps = previous.gaps()
        for t in levels:
            if previous.in_plateau(t):
                raise PreconditionError(f"candidate level {t!r} lies inside an existing plateau")
            for lo, hi in gaps:
                if lo <= t <= hi:
                    terms += [t - lo, hi - t]
                    if t == lo or t == hi:
                        hits.append(t)
                    break
        terms += _diffs(levels)
        gap = _min_positive(terms)
        q = gap / 2 ** (step + 1)
        intervals = []
        for t in levels:
            kind = "U" if t <= a / 2 else "W"
            idx = sum(1 for s in levels if (s <= a / 2) == (t <= a / 2) and s <= t)
            intervals.append((kind, idx, (t - q, t + q), previous.exact(t)))
    if gap is None or gap <= 0:
        raise DegenerateInputError("no positive level gap")
    return LevelDecomposition(
        a=a,
        step=step,
        u_levels=u,
        v_levels=v,
        w_levels=w,
        u_gap=gap,
        intervals=tuple(intervals),
        endpoint_hits=tuple(hits),
    )


def _merge(plateaus: list) -> list:
    """Coalesce overlapping plateaus; overlapping ones must carry the same value.

    The value of the plateau from the earliest step wins.
    """
    plateaus = sorted(plateaus, key=lambda p: (p.lo, p.step))
    out = [plateaus[0]]
    for p in plateaus[1:]:
        cur = out[-1]
        if p.lo < cur.hi:
            if p.value != cur.value:
                raise ConstructionError(
                    f"overlapping plateaus with different values: "
                    f"{cur.kind}{cur.index}@step{cur.step} ({cur.lo!r}, {cur.hi!r}) -> {cur.value!r} vs "
                    f"{p.kind}{p.index}@step{p.step} ({p.lo!r}, {p.hi!r}) -> {p.value!r}"
                )
            keep = cur if cur.step <= p.step else p
            out[-1] = Plateau(cur.lo, max(cur.hi, p.hi), keep.value, keep.kind, keep.index, keep.step)
        else:
            out.append(p)
    return out


def build_phi(levels: LevelDecomposition, j: int, previous: Optional[PiecewiseLinear] = None) -> PiecewiseLinear:
    """Piecewise-linear profile of step ``j`` from a level decomposition."""
    if j != levels.step:
        raise PreconditionError(f"level decomposition is for step {levels.step}, not {j}")
    if j >= 2 and previous is None:
        raise PreconditionError("steps after the first need the previous profile")
    if levels.u_gap <= 0:
        raise PreconditionError("level gap must be positive")
    new = [Plateau(lo, hi, val, kind, idx, j) for kind, idx, (lo, hi), val in levels.intervals]
    old = list(previous.plateaus) if previous is not None else []
    plateaus = _merge(old + new)

    bps, vals = [], []
    for p in plateaus:
        lo = max(p.lo, Fraction(0))
        if bps and lo <= bps[-1]:
            raise ConstructionError(f"plateaus touch without merging at {lo!r}")
        bps.append(lo)
        vals.append(p.value)
        if p.hi != INF:
            bps.append(p.hi)
            vals.append(p.value)
    return PiecewiseLinear(
        breakpoints=tuple(bps),
        values=tuple(vals),
        plateaus=tuple(plateaus),
        step=j,
        u_gap=levels.u_gap,
        a=levels.a,
    )


def _select_candidates(space: PointedMetricSpace, pool: Sequence[int], resolution: Optional[float]):
    if resolution is not None:
        clustered = accumulation_derivative(space, pool, resolution)
        if clustered:
            return clustered
    return tuple(pool)


def _off_plateau(space: PointedMetricSpace, x: int, phi: PiecewiseLinear, pool: Sequence[int]):
    return tuple(z for z in pool if not phi.in_plateau(space.d(x, z)))


def _flat_radius(space: PointedMetricSpace, x: int, phi: PiecewiseLinear, off: Sequence[int]) -> Fraction:
    if not off:
        return phi.u_gap / 2
    off_arr = np.array(off)
    terms = [phi.u_gap]
    if len(off) > 1:
        sub = space.dist[np.ix_(off_arr, off_arr)]
        terms.append(Fraction(float(sub[~np.eye(len(off), dtype=bool)].min())))
    rest = np.setdiff1d(np.arange(space.n), off_arr)
    if rest.size:
        for z in off:
            if not phi.in_closed_plateau(space.d(x, z)):
                terms.append(Fraction(float(space.dist[z, rest].min())))
    return min(terms) / 2


def proper_separator(
    space: PointedMetricSpace,
    x: int,
    y: int,
    stop_size: int = 0,
    resolution: Optional[float] = None,
    max_steps: int = 64,
) -> SeparatorResult:
    """Separate x and y by iterated plateau refinement.

    ``resolution`` defaults to a/4; pass ``math.inf`` to take all off-plateau
    points as candidates at once (a single step).
    """
    _check_pair(space, x, y)
    if stop_size < 0:
        raise PreconditionError("stop_size must be >= 0")
    a = space.d(x, y)
    if resolution is None:
        resolution = a / 4
    if not math.isfinite(resolution):
        resolution = None

    reach = 3 * Fraction(a) / 2
    ball = tuple(z for z in range(space.n) if Fraction(space.d(x, z)) <= reach)
    cand = _select_candidates(space, ball, resolution)
    levels = level_decomposition(space, x, y, cand)
    phi = build_phi(levels, 1)
    history = [levels]
    off = _off_plateau(space, x, phi, range(space.n))
    sizes = [len(off)]
    while len(off) > stop_size:
        if phi.step >= max_steps:
            raise ConstructionError(f"refinement did not reach {stop_size} off-plateau points in {max_steps} steps")
        cand = _select_candidates(space, off, resolution)
        levels = level_decomposition(space, x, y, cand, previous=phi)
        phi = build_phi(levels, phi.step + 1, phi)
        history.append(levels)
        new_off = _off_plateau(space, x, phi, off)
        if len(new_off) >= len(off):
            raise ConstructionError("refinement step did not shrink the off-plateau set")
        off = new_off
        sizes.append(len(off))

    at_base = phi.exact(space.d(x, 0))
    h = LipFunction(space, [float(2 * (phi.exact(space.d(x, z)) - at_base)) for z in range(space.n)])
    radius = _flat_radius(space, x, phi, off)
    edges = {e for p in phi.plateaus for e in (p.lo, p.hi)}
    hits = {t for lv in history for t in lv.endpoint_hits}
    hits |= {Fraction(space.d(x, z)) for z in range(space.n)} & edges
    hits = tuple(float(t) for t in sorted(hits))
    return SeparatorResult(
        h=h,
        x=x,
        y=y,
        method="proper",
        lip_bound=2.0 * phi.lipschitz(),
        flat_radius=_float_down(radius),
        flat_inclusive=True,
        iterations=phi.step,
        c_bound=c_bound(phi.step),
        phi=phi,
        levels=tuple(history),
        off_plateau_sizes=tuple(sizes),
        diagnostics={"endpoint_hits": hits, "resolution": resolution, "off_plateau": off},
    )


def check_separator(result: SeparatorResult, tol: float = 1e-12) -> dict:
    """Exhaustive postcondition check of a separator."""
    h = result.h
    space = h.space
    lip = lip_constant(h)[0]
    d = space.dist
    same = d <= result.flat_radius if result.flat_inclusive else d < result.flat_radius
    diff = np.abs(h.values[:, None] - h.values[None, :])
    flat_ok = bool(np.all(diff[same] == 0.0))
    return {
        "lip": lip,
        "base_ok": h(0) == 0.0,
        "equality_residual": result.equality_residual,
        "equality_ok": result.equality_residual <= tol * max(1.0, space.d(result.x, result.y)),
        "lip_ok": lip <= result.lip_bound + tol and result.lip_bound <= result.c_bound + tol,
        "flat_ok": flat_ok and flatness_at_scale(h, result.flat_radius) == 0.0,
    }


def separate(space: PointedMetricSpace, x: int, y: int, method: str = "auto", **kw) -> SeparatorResult:
    if method == "auto":
        method = "ultrametric" if is_ultrametric(space)[0] else "proper"
    if method == "ultrametric":
        return ultrametric_separator(space, x, y)
    if method == "proper":
        return proper_separator(space, x, y, **kw)
    raise ValueError(f"unknown separator method {method!r}")


@dataclass(frozen=True)
class SeparationCertificate:
    rows: tuple  # dicts, one per pair
    c: float
    c_limit: float
    ok: bool


def separation_certificate(
    space: PointedMetricSpace,
    sample_pairs: Optional[Iterable[tuple]] = None,
    method: str = "auto",
    **kw,
) -> SeparationCertificate:
    """Run a separator on each pair and check the uniform bound c.

    ``c_limit`` is the limit constant plus its certified error, so the check
    is ``c <= c_limit`` without any floating-point fudge.
    """
    if sample_pairs is None:
        sample_pairs = [(i, j) for i in range(space.n) for j in range(i + 1, space.n)]
    rows = []
    for x, y in sample_pairs:
        if x == y:
            raise DegenerateInputError(f"pair ({x}, {y}) is degenerate")
        res = separate(space, x, y, method=method, **kw)
        chk = check_separator(res)
        rows.append(
            {
                "x": x,
                "y": y,
                "method": res.method,
                "lip": chk["lip"],
                "lip_bound": res.lip_bound,
                "c_bound": res.c_bound,
                "iterations": res.iterations,
                "equality_residual": res.equality_residual,
                "flat_radius": res.flat_radius,
                "checks_ok": all(v for k, v in chk.items() if k.endswith("_ok")),
            }
        )
    c = max((r["lip_bound"] for r in rows), default=0.0)
    c_limit = SEPARATION_CONSTANT + SEPARATION_CONSTANT_ERROR
    ok = c <= c_limit and all(r["checks_ok"] for r in rows)
    return SeparationCertificate(rows=tuple(rows), c=c, c_limit=c_limit, ok=ok)
