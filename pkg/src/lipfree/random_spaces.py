"""Canonical fixtures and seeded random generators of finite pointed metric spaces."""
from __future__ import annotations

import numpy as np

from lipfree.lipschitz import LipFunction
from lipfree.metric_core import PointedMetricSpace, from_points


def U4() -> PointedMetricSpace:
    """Ultrametric {0, a, b, c}: d(a,b)=1, d(a,c)=d(b,c)=2, base at distance 4."""
    d = np.array(
        [
            [0.0, 4.0, 4.0, 4.0],
            [4.0, 0.0, 1.0, 2.0],
            [4.0, 1.0, 0.0, 2.0],
            [4.0, 2.0, 2.0, 0.0],
        ]
    )
    return PointedMetricSpace(d, ("0", "a", "b", "c"))


def L3() -> PointedMetricSpace:
    """{0, 1, 3} on the real line."""
    return from_points([[0.0], [1.0], [3.0]], labels=("0", "1", "3"))


def C4() -> PointedMetricSpace:
    """Graph metric of the 4-cycle 0-1-2-3-0."""
    d = np.array(
        [
            [0.0, 1.0, 2.0, 1.0],
            [1.0, 0.0, 1.0, 2.0],
            [2.0, 1.0, 0.0, 1.0],
            [1.0, 2.0, 1.0, 0.0],
        ]
    )
    return PointedMetricSpace(d)


FIXTURES = {"U4": U4, "L3": L3, "C4": C4}


def random_plane_metric(rng: np.random.Generator, n: int, scale: float = 10.0) -> PointedMetricSpace:
    """n random points of [0, scale]^2 with the Euclidean distance; index 0 is the base."""
    return from_points(rng.uniform(0.0, scale, size=(n, 2)))


def random_line_metric(rng: np.random.Generator, n: int, scale: float = 10.0) -> PointedMetricSpace:
    return from_points(rng.uniform(0.0, scale, size=(n, 1)))


def random_merges(rng: np.random.Generator, n: int, max_height: float = 8.0) -> list:
    """Random binary dendrogram on n leaves as linkage rows [left, right, height].

    Leaves are 0..n-1 and the i-th merge creates node n + i. Heights are
    distinct sorted uniforms, so they strictly increase root-ward.
    """
    if n < 2:
        return []
    heights = np.sort(rng.uniform(0.0, max_height, size=n - 1))
    heights = np.maximum.accumulate(np.maximum(heights, 1e-3))
    for i in range(1, len(heights)):  # ties are measure-zero but keep them impossible
        if heights[i] <= heights[i - 1]:
            heights[i] = np.nextafter(heights[i - 1], np.inf)
    active = list(range(n))
    merges = []
    for i, h in enumerate(heights):
        a, b = sorted(rng.choice(len(active), size=2, replace=False))
        left, right = active[a], active[b]
        active.pop(b)
        active[a] = n + i
        merges.append([int(left), int(right), float(h)])
    return merges


def dendrogram_distances(n: int, merges) -> np.ndarray:
    """Ultrametric of a linkage: d(x, y) is the height of their lowest common ancestor."""
    d = np.zeros((n, n))
    members = {i: [i] for i in range(n)}
    for i, (left, right, h) in enumerate(merges):
        a, b = members.pop(int(left)), members.pop(int(right))
        d[np.ix_(a, b)] = h
        d[np.ix_(b, a)] = h
        members[n + i] = a + b
    return d


def random_dendrogram(rng: np.random.Generator, n: int, max_height: float = 8.0) -> PointedMetricSpace:
    """Random ultrametric on n points induced by a random dendrogram."""
    return PointedMetricSpace(dendrogram_distances(n, random_merges(rng, n, max_height)))


def random_function(rng: np.random.Generator, space: PointedMetricSpace, scale: float = 1.0):
    """Values uniform in [-scale * d(0, x), scale * d(0, x)], zero at the base."""
    v = rng.uniform(-1.0, 1.0, size=space.n) * scale * space.dist[0]
    v[0] = 0.0
    return LipFunction(space, v)
