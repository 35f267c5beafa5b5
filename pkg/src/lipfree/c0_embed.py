"""Embedding of functions into c0 through difference quotients on an epsilon-net.

Ordered pairs (x1, x2) are grouped into dyadic cells

    C[j, k] = {(x1, x2) : d(0, x1) <= 2**j and 2**k <= d(x1, x2) <= 2**(k+1)},

each cell gets a greedy 2**(k-3) * eps net in the max-metric on pairs, and f
is mapped to its quotients (f(x1) - f(x2)) / d(x1, x2) on the net. The sup of
those coordinates recovers the Lipschitz constant up to a factor 1 + eps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from lipfree.errors import PreconditionError
from lipfree.lipschitz import LipFunction, lip_constant
from lipfree.metric_core import TAU_METRIC, PointedMetricSpace


def pair_distance(space: PointedMetricSpace, p: tuple, q: tuple) -> float:
    """max(d(p1, q1), d(p2, q2))."""
    return max(space.d(p[0], q[0]), space.d(p[1], q[1]))


def _floor_log2(t: float) -> int:
    m, e = math.frexp(t)  # t = m * 2**e with 0.5 <= m < 1
    return e - 1


def _ceil_log2(t: float) -> int:
    m, e = math.frexp(t)
    return e - 1 if m == 0.5 else e


def cell_ranges(space: PointedMetricSpace):
    """Index ranges (j values, k values) covering every ordered pair."""
    pos = space.positive_distances()
    if space.n < 2 or pos.size == 0:
        return range(0), range(0)
    j_max = max(0, _ceil_log2(float(space.dist[0].max())))
    k_min = _floor_log2(float(pos[0])) - 1
    k_max = _ceil_log2(float(pos[-1]))
    return range(0, j_max + 1), range(k_min, k_max + 1)


def build_pair_sets(space: PointedMetricSpace) -> dict:
    """Nonempty cells as {(j, k): [(x1, x2), ...]} in lexicographic pair order.

    Pairs at an exact dyadic distance 2**k lie in both cells k - 1 and k.
    """
    js, ks = cell_ranges(space)
    d = space.dist
    cells = {}
    for j in js:
        first_ok = d[0] <= math.ldexp(1.0, j)
        for k in ks:
            lo, hi = math.ldexp(1.0, k), math.ldexp(1.0, k + 1)
            mask = first_ok[:, None] & (d >= lo) & (d <= hi) & (d > TAU_METRIC)
            pairs = [(int(a), int(b)) for a, b in np.argwhere(mask)]
            if pairs:
                cells[(j, k)] = pairs
    return cells


def build_net(space: PointedMetricSpace, pairs, j: int, k: int, epsilon: float) -> list:
    """Greedy first-fit net of radius 2**(k-3) * epsilon over ``pairs``."""
    if not 0 < epsilon < 1:
        raise PreconditionError("epsilon must lie in (0, 1)")
    radius = math.ldexp(epsilon, k - 3)
    kept: list = []
    if not pairs:
        return kept
    arr = np.asarray(pairs)
    d = space.dist
    for p in arr:
        if kept:
            ka = np.asarray(kept)
            close = np.maximum(d[p[0], ka[:, 0]], d[p[1], ka[:, 1]]) <= radius
            if close.any():
                continue
        kept.append((int(p[0]), int(p[1])))
    return kept


@dataclass(frozen=True)
class NetIndex:
    space: PointedMetricSpace
    epsilon: float
    entries: tuple  # (j, k, (x1, x2)) sorted by (j, k, pair)
    cells: dict = field(default_factory=dict, repr=False)  # (j, k) -> member pairs

    def cell_sizes(self) -> dict:
        sizes = {}
        for j, k, _ in self.entries:
            sizes[(j, k)] = sizes.get((j, k), 0) + 1
        return sizes

    def pairs(self) -> np.ndarray:
        return np.array([p for _, _, p in self.entries], dtype=int).reshape(-1, 2)


def build_net_index(space: PointedMetricSpace, epsilon: float) -> NetIndex:
    if not 0 < epsilon < 1:
        raise PreconditionError("epsilon must lie in (0, 1)")
    cells = build_pair_sets(space)
    entries = []
    for (j, k), pairs in sorted(cells.items()):
        entries.extend((j, k, p) for p in build_net(space, pairs, j, k, epsilon))
    return NetIndex(space=space, epsilon=float(epsilon), entries=tuple(entries), cells=cells)


def embed(f: LipFunction, net: NetIndex) -> np.ndarray:
    """Coordinates (f(x1) - f(x2)) / d(x1, x2), one per net entry."""
    p = net.pairs()
    if p.size == 0:
        return np.zeros(0)
    return (f.values[p[:, 0]] - f.values[p[:, 1]]) / f.space.dist[p[:, 0], p[:, 1]]


def cell_maxima(f: LipFunction, net: NetIndex) -> dict:
    """max |coordinate| per (j, k) cell."""
    coords = np.abs(embed(f, net))
    out: dict = {}
    for (j, k, _), c in zip(net.entries, coords):
        out[(j, k)] = max(out.get((j, k), 0.0), float(c))
    return out


@dataclass(frozen=True)
class EmbeddingReport:
    sup_norm: float
    lip: float
    lower_ok: bool
    upper_ok: bool
    lower_slack: float  # lip - sup_norm
    upper_slack: float  # (1 + eps) * sup_norm - lip
    chain: Optional[dict] = None


def nearest_entry(net: NetIndex, j: int, k: int, pair: tuple):
    """Net entry of cell (j, k) closest to ``pair`` in the max-metric."""
    best = None
    for jj, kk, p in net.entries:
        if (jj, kk) != (j, k):
            continue
        dist = pair_distance(net.space, pair, p)
        if best is None or dist < best[1]:
            best = (p, dist)
    return best


def locate_cell(space: PointedMetricSpace, pair: tuple) -> tuple:
    """Smallest j >= 0 and the k = floor(log2 d) cell holding ``pair``."""
    y1, y2 = pair
    r0 = space.d(0, y1)
    j = 0 if r0 <= 1.0 else _ceil_log2(r0)
    k = _floor_log2(space.d(y1, y2))
    return j, k


def verify_sandwich(f: LipFunction, net: NetIndex, tol: float = 1e-12) -> EmbeddingReport:
    """Check sup|Tf| <= lip(f) <= (1 + eps) sup|Tf| and replay the net estimate.

    The chain replays, for the pair (y1, y2) attaining lip(f) and its nearest
    net entry (x1, x2) in the same cell:
    d(y1, y2) >= d(x1, x2) - 2**(k-2) eps >= d(x1, x2) (1 - eps/4) and
    q(y) <= q(x) / (1 - eps/4) + (eps/4) lip(f).
    """
    eps = net.epsilon
    coords = embed(f, net)
    sup = float(np.abs(coords).max()) if coords.size else 0.0
    lip, pair = lip_constant(f)
    chain = None
    if pair is not None and lip > 0:
        j, k = locate_cell(f.space, pair)
        hit = nearest_entry(net, j, k, pair)
        if hit is not None:
            (x1, x2), pd = hit
            y1, y2 = pair
            dy, dx = f.space.d(y1, y2), f.space.d(x1, x2)
            qx = abs(f(x1) - f(x2)) / dx
            qy = abs(f(y1) - f(y2)) / dy
            chain = {
                "cell": (j, k),
                "lip_pair": pair,
                "net_pair": (x1, x2),
                "pair_distance": pd,
                "net_radius": math.ldexp(eps, k - 3),
                "d_lip_pair": dy,
                "d_net_pair": dx,
                "geometric_ok": dy >= dx * (1 - eps / 4) - tol,
                "q_lip_pair": qy,
                "q_net_pair": qx,
                "estimate": qx / (1 - eps / 4) + eps / 4 * lip,
                "estimate_ok": qy <= qx / (1 - eps / 4) + eps / 4 * lip + tol,
            }
    return EmbeddingReport(
        sup_norm=sup,
        lip=lip,
        lower_ok=sup <= lip + tol,
        upper_ok=lip <= (1 + eps) * sup + tol,
        lower_slack=lip - sup,
        upper_slack=(1 + eps) * sup - lip,
        chain=chain,
    )


def geometric_check(net: NetIndex, tol: float = 1e-12) -> tuple:
    """For every cell member, its nearest net entry (x1, x2) satisfies
    d(y1, y2) >= d(x1, x2) (1 - eps/4) and lies within the net radius.

    Returns (all_ok, number of checked pairs, worst slack).
    """
    space = net.space
    eps = net.epsilon
    by_cell: dict = {}
    for j, k, p in net.entries:
        by_cell.setdefault((j, k), []).append(p)
    d = space.dist
    ok, count, worst = True, 0, math.inf
    for (j, k), members in net.cells.items():
        kept = np.asarray(by_cell[(j, k)])
        radius = math.ldexp(eps, k - 3)
        for y1, y2 in members:
            pd = np.maximum(d[y1, kept[:, 0]], d[y2, kept[:, 1]])
            i = int(np.argmin(pd))
            x1, x2 = kept[i]
            slack = d[y1, y2] - d[x1, x2] * (1 - eps / 4)
            worst = min(worst, slack)
            ok &= bool(pd[i] <= radius) and slack >= -tol
            count += 1
    return ok, count, worst
