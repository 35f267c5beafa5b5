"""JSON space documents.

Two formats share one schema version::

    {"schema": 1, "format": "matrix", "labels": ["0", "a"], "dist": [[0, 1], [1, 0]]}
    {"schema": 1, "format": "dendrogram", "labels": ["0", "a", "b"],
     "merges": [[1, 2, 1.0], [0, 3, 4.0]]}

The first label is the base point. Dendrogram merges follow the linkage
convention: leaves are 0..n-1 and merge i creates node n + i at the given
height; heights must strictly increase toward the root.
"""
from __future__ import annotations

import json
from typing import Any

import numpy as np

from lipfree.errors import StructuralInputError
from lipfree.metric_core import PointedMetricSpace
from lipfree.random_spaces import dendrogram_distances

SCHEMA_VERSION = 1
FORMATS = ("matrix", "dendrogram")


def _labels(doc: dict, n: int | None = None) -> tuple:
    labels = doc.get("labels")
    if not isinstance(labels, list) or not labels:
        raise StructuralInputError("document needs a non-empty 'labels' list")
    if n is not None and len(labels) != n:
        raise StructuralInputError(f"{len(labels)} labels for {n} points")
    return tuple(str(l) for l in labels)


def _check_merges(n: int, merges) -> list:
    if not isinstance(merges, list) or len(merges) != n - 1:
        raise StructuralInputError(f"a dendrogram on {n} leaves needs exactly {n - 1} merges")
    used = set()
    height = {}
    out = []
    for i, row in enumerate(merges):
        if not isinstance(row, list) or len(row) != 3:
            raise StructuralInputError(f"merge {i} must be [left, right, height]")
        left, right, h = row
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in (left, right)):
            raise StructuralInputError(f"merge {i}: node ids must be integers")
        if not isinstance(h, (int, float)) or isinstance(h, bool) or not np.isfinite(h) or h <= 0:
            raise StructuralInputError(f"merge {i}: height must be a positive finite number")
        for node in (left, right):
            if not 0 <= node < n + i:
                raise StructuralInputError(f"merge {i}: node {node} does not exist yet")
            if node in used:
                raise StructuralInputError(f"merge {i}: node {node} already merged")
            if node >= n and height[node] >= h:
                raise StructuralInputError(f"merge {i}: heights must strictly increase toward the root")
        if left == right:
            raise StructuralInputError(f"merge {i}: cannot merge a node with itself")
        used.update((left, right))
        height[n + i] = float(h)
        out.append([left, right, float(h)])
    return out


def space_from_document(doc: Any) -> PointedMetricSpace:
    """Build a space from a parsed document; raises StructuralInputError on bad input.

    Metric axioms are not checked here; see ``metric_core.validate_metric``.
    """
    if not isinstance(doc, dict):
        raise StructuralInputError("document must be a JSON object")
    if doc.get("schema") != SCHEMA_VERSION:
        raise StructuralInputError(f"unsupported schema {doc.get('schema')!r}, expected {SCHEMA_VERSION}")
    fmt = doc.get("format")
    if fmt == "matrix":
        dist = doc.get("dist")
        try:
            d = np.array(dist, dtype=float)
        except (TypeError, ValueError):
            raise StructuralInputError("'dist' must be a square numeric matrix") from None
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
            raise StructuralInputError("'dist' must be a square numeric matrix")
        if not np.all(np.isfinite(d)):
            raise StructuralInputError("'dist' entries must be finite")
        return PointedMetricSpace(d, _labels(doc, d.shape[0]))
    if fmt == "dendrogram":
        labels = _labels(doc)
        merges = _check_merges(len(labels), doc.get("merges"))
        return PointedMetricSpace(dendrogram_distances(len(labels), merges), labels)
    raise StructuralInputError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def loads(text: str) -> PointedMetricSpace:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StructuralInputError(f"not valid JSON: {exc}") from None
    return space_from_document(doc)


def load(path) -> PointedMetricSpace:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def matrix_document(space: PointedMetricSpace) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "format": "matrix",
        "labels": list(space.labels),
        "dist": space.dist.tolist(),
    }


def dendrogram_document(labels, merges) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "format": "dendrogram",
        "labels": [str(l) for l in labels],
        "merges": [[int(a), int(b), float(h)] for a, b, h in merges],
    }


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"
