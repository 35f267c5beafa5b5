"""Norm of finitely supported vectors of the Lipschitz-free space.

The norm of mu = sum a_i delta_{x_i} is the optimal transport cost of the
balanced measure (mu with the missing mass placed at the base point). The
primal is solved by successive shortest paths on the complete graph over the
support; the dual potential is read off the final residual graph, so every
value comes with a transport plan, a 1-Lipschitz potential and their gap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from lipfree.errors import CertificateError, DegenerateInputError, StructuralInputError
from lipfree.lipschitz import LipFunction, lip_constant
from lipfree.metric_core import PointedMetricSpace

TAU_DUAL = 1e-8


class FreeVector:
    """Finitely supported signed combination of point masses."""

    __slots__ = ("space", "_masses")

    def __init__(self, space: PointedMetricSpace, masses: Mapping[int, float] | None = None):
        self.space = space
        clean = {}
        for i, a in (masses or {}).items():
            i = int(i)
            if not 0 <= i < space.n:
                raise StructuralInputError(f"point index {i} out of range")
            a = float(a)
            if a != 0.0:
                clean[i] = clean.get(i, 0.0) + a
        self._masses = {i: a for i, a in sorted(clean.items()) if a != 0.0}

    @classmethod
    def delta(cls, space: PointedMetricSpace, x: int) -> "FreeVector":
        return cls(space, {x: 1.0})

    @classmethod
    def from_dense(cls, space: PointedMetricSpace, values) -> "FreeVector":
        return cls(space, dict(enumerate(np.asarray(values, dtype=float))))

    @property
    def masses(self) -> dict:
        return dict(self._masses)

    def support(self) -> tuple:
        return tuple(self._masses)

    def total_mass(self) -> float:
        return float(sum(self._masses.values()))

    def l1(self) -> float:
        return float(sum(abs(a) for a in self._masses.values()))

    def dense(self) -> np.ndarray:
        out = np.zeros(self.space.n)
        for i, a in self._masses.items():
            out[i] = a
        return out

    def _check(self, other: "FreeVector"):
        if self.space is not other.space and self.space != other.space:
            raise StructuralInputError("free vectors live on different spaces")

    def __add__(self, other: "FreeVector") -> "FreeVector":
        self._check(other)
        out = dict(self._masses)
        for i, a in other._masses.items():
            out[i] = out.get(i, 0.0) + a
        return FreeVector(self.space, out)

    def __neg__(self) -> "FreeVector":
        return FreeVector(self.space, {i: -a for i, a in self._masses.items()})

    def __sub__(self, other: "FreeVector") -> "FreeVector":
        return self + (-other)

    def __mul__(self, c: float) -> "FreeVector":
        return FreeVector(self.space, {i: float(c) * a for i, a in self._masses.items()})

    __rmul__ = __mul__

    def __truediv__(self, c: float) -> "FreeVector":
        return FreeVector(self.space, {i: a / float(c) for i, a in self._masses.items()})

    def __eq__(self, other):
        if not isinstance(other, FreeVector):
            return NotImplemented
        return self.space == other.space and self._masses == other._masses

    def __bool__(self):
        return bool(self._masses)

    def __repr__(self):
        terms = " + ".join(f"{a:g}*d[{self.space.labels[i]}]" for i, a in self._masses.items())
        return f"FreeVector({terms or '0'})"


@dataclass(frozen=True)
class NormCertificate:
    value: float
    plan: tuple = ()  # (source, target, flow)
    potential: LipFunction | None = None
    dual_value: float = 0.0
    gap: float = 0.0
    potential_lip: float = 0.0
    balanced: FreeVector | None = field(default=None, repr=False)


def mass_balance(mu: FreeVector) -> FreeVector:
    """Put mass -sum(a_i) at the base point so the total vanishes."""
    total = mu.total_mass()
    if total == 0.0:
        return mu
    return mu + FreeVector(mu.space, {0: -total})


def pair_molecule(space: PointedMetricSpace, x: int, y: int) -> FreeVector:
    """(delta_x - delta_y) / d(x, y), a vector of norm one."""
    if x == y:
        raise DegenerateInputError("molecule needs two distinct points")
    return FreeVector(space, {x: 1.0, y: -1.0}) / space.d(x, y)


def evaluate(f: LipFunction, mu: FreeVector) -> float:
    """Duality pairing <mu, f> = sum a_i f(x_i)."""
    if f.space is not mu.space and f.space != mu.space:
        raise StructuralInputError("function and vector live on different spaces")
    return float(sum(a * f.values[i] for i, a in mu.masses.items()))


def _bellman_ford(cost: np.ndarray, dist0: np.ndarray) -> np.ndarray:
    """Shortest distances on a dense cost matrix (inf = no arc), no negative cycles."""
    dist = dist0.copy()
    for _ in range(cost.shape[0]):
        val = (dist[:, None] + cost).min(axis=0)
        better = val < dist
        if not better.any():
            break
        dist[better] = val[better]
    return dist


def _dijkstra(cost: np.ndarray, source: int):
    """Dense Dijkstra; cost must be nonnegative where finite.

    Among equally short labels the smallest node index is settled first,
    and a label is only replaced by a strictly shorter one.
    """
    m = cost.shape[0]
    dist = np.full(m, np.inf)
    pred = np.full(m, -1)
    done = np.zeros(m, dtype=bool)
    dist[source] = 0.0
    for _ in range(m):
        u = int(np.argmin(np.where(done, np.inf, dist)))
        if done[u] or not np.isfinite(dist[u]):
            break
        done[u] = True
        cand = dist[u] + cost[u]
        better = (cand < dist) & ~done
        dist[better] = cand[better]
        pred[better] = u
    return dist, pred


def _residual_cost(d: np.ndarray, flow: np.ndarray) -> np.ndarray:
    # forward arcs i->j are uncapacitated with cost d[i,j]; positive flow on
    # i->j adds a reverse arc j->i of cost -d[i,j], which replaces the
    # parallel forward arc for shortest-path purposes
    cost = d.copy()
    np.fill_diagonal(cost, np.inf)
    back = flow.T > 0
    cost[back] = -d.T[back]
    return cost


def transport(d: np.ndarray, supply: np.ndarray):
    """Successive shortest paths for the uncapacitated transport problem.

    ``supply`` sums to zero; positive entries are sources. A super source
    (index m) and super sink (index m+1) carry the supplies; paths are found
    by Dijkstra on reduced costs. Returns the flow matrix between support
    points and a node potential of the final residual graph.
    """
    m = len(supply)
    S, T = m, m + 1
    remaining = supply.astype(float).copy()  # >0: unsent supply, <0: unmet demand
    shipped = np.zeros(m)  # flow on S->s (sources) or t->T (sinks)
    flow = np.zeros((m, m))
    pi = np.zeros(m + 2)
    dust = 1e-14 * max(1.0, float(np.abs(supply).sum()))
    max_rounds = 4 * m * m + 16
    for _ in range(max_rounds):
        if not (remaining > dust).any() or not (remaining < -dust).any():
            break
        full = np.full((m + 2, m + 2), np.inf)
        full[:m, :m] = _residual_cost(d, flow)
        full[S, :m] = np.where(remaining > dust, 0.0, np.inf)
        full[:m, S] = np.where((supply > 0) & (shipped > 0), 0.0, np.inf)
        full[:m, T] = np.where(remaining < -dust, 0.0, np.inf)
        full[T, :m] = np.where((supply < 0) & (shipped > 0), 0.0, np.inf)
        reduced = np.maximum(full + pi[:, None] - pi[None, :], 0.0)
        reduced[~np.isfinite(full)] = np.inf
        dist, pred = _dijkstra(reduced, S)
        if not np.isfinite(dist[T]):
            raise CertificateError("no augmenting path although supply remains")
        reach = np.isfinite(dist)
        pi[reach] += dist[reach]
        pi[~reach] += dist[reach].max()

        path = [T]
        while path[-1] != S:
            path.append(int(pred[path[-1]]))
        path.reverse()
        inner = path[1:-1]
        s, t = inner[0], inner[-1]
        amount = min(remaining[s], -remaining[t])
        arcs = list(zip(inner, inner[1:]))
        for u, v in arcs:
            if flow[v, u] > 0:
                amount = min(amount, flow[v, u])
        for u, v in arcs:
            if flow[v, u] > 0:
                flow[v, u] = 0.0 if amount == flow[v, u] else flow[v, u] - amount
            else:
                flow[u, v] += amount
        remaining[s] = 0.0 if amount == remaining[s] else remaining[s] - amount
        remaining[t] = 0.0 if amount == -remaining[t] else remaining[t] + amount
        shipped[s] += amount
        shipped[t] += amount
    else:
        raise CertificateError("successive shortest paths did not terminate")
    potential = _bellman_ford(_residual_cost(d, flow), np.zeros(m))
    return flow, potential


def free_norm(mu: FreeVector, tol: float = TAU_DUAL) -> NormCertificate:
    space = mu.space
    balanced = mass_balance(mu)
    if not balanced:
        return NormCertificate(value=0.0, potential=LipFunction.zero(space), balanced=balanced)
    support = list(balanced.support())
    if 0 not in support:
        support = [0] + support
    idx = np.array(support)
    d = space.dist[np.ix_(idx, idx)]
    supply = np.array([balanced.masses.get(i, 0.0) for i in support])

    flow, pot = transport(d, supply)
    plan = tuple(
        (int(idx[i]), int(idx[j]), float(flow[i, j])) for i, j in zip(*np.nonzero(flow))
    )
    primal = float((flow * d).sum())

    # f = -potential is 1-Lipschitz on the support; McShane extends it to
    # the whole space without raising the constant.
    f_supp = -pot
    ext = (f_supp[None, :] + space.dist[:, idx]).min(axis=1)
    ext = ext - ext[0]
    potential = LipFunction(space, ext)
    dual = evaluate(potential, balanced)
    lip = lip_constant(potential)[0] if space.n > 1 else 0.0
    gap = abs(primal - dual)
    cert = NormCertificate(
        value=primal,
        plan=plan,
        potential=potential,
        dual_value=dual,
        gap=gap,
        potential_lip=lip,
        balanced=balanced,
    )
    if gap > tol or lip > 1.0 + tol:
        raise CertificateError(f"duality certificate failed: gap={gap:.3e}, lip={lip!r}")
    return cert
