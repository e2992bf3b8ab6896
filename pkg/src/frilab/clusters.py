"""Connected components of occupied edges: sizes, bounding boxes, diameters."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .lattice import EdgeSet, Point


@dataclass(frozen=True)
class ClusterStats:
    size_vertices: int
    size_edges: int
    bbox: tuple[Point, Point]
    min_vertex: Point

    @property
    def bbox_diameter(self) -> float:
        return bbox_diameter(self)


@dataclass
class ClusterReport:
    component_count: int
    largest: Optional[ClusterStats]
    second: Optional[ClusterStats]
    size_histogram: dict = field(default_factory=dict)


@dataclass
class Components:
    """Labelling of the vertices touched by at least one occupied edge.

    ``labels[v]`` is -1 for untouched vertices; component ids are numbered in
    order of each component's smallest vertex index (lexicographic order).
    """

    edges: EdgeSet
    labels: np.ndarray
    n_vertices: np.ndarray
    n_edges: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    first_vertex: np.ndarray
    merges: int

    @property
    def count(self) -> int:
        return len(self.n_vertices)

    @property
    def touched(self) -> int:
        return int(np.count_nonzero(self.labels >= 0))

    def stats(self, c: int) -> ClusterStats:
        box = self.edges.box
        return ClusterStats(
            int(self.n_vertices[c]), int(self.n_edges[c]),
            (tuple(int(x) for x in self.lo[c]), tuple(int(x) for x in self.hi[c])),
            box.point(int(self.first_vertex[c])),
        )

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.labels == c)


@njit(cache=True)
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def _label(occ, d, n_v, lo_box, shape, strides):
    parent = np.arange(n_v)
    rank = np.zeros(n_v, dtype=np.int64)
    touched = np.zeros(n_v, dtype=np.uint8)
    merges = 0
    for e in range(occ.shape[0]):
        if occ[e] == 0:
            continue
        v = e // d
        w = v + strides[e % d]
        touched[v] = 1
        touched[w] = 1
        a = _find(parent, v)
        b = _find(parent, w)
        if a == b:
            continue
        if rank[a] < rank[b]:
            a, b = b, a
        parent[b] = a
        if rank[a] == rank[b]:
            rank[a] += 1
        merges += 1
    labels = np.full(n_v, -1, dtype=np.int64)
    root_id = np.full(n_v, -1, dtype=np.int64)
    k = 0
    for v in range(n_v):
        if touched[v]:
            r = _find(parent, v)
            if root_id[r] < 0:
                root_id[r] = k
                k += 1
            labels[v] = root_id[r]
    nv = np.zeros(k, dtype=np.int64)
    ne = np.zeros(k, dtype=np.int64)
    lo = np.empty((k, d), dtype=np.int64)
    hi = np.empty((k, d), dtype=np.int64)
    first = np.full(k, -1, dtype=np.int64)
    x = np.empty(d, dtype=np.int64)
    for v in range(n_v):
        c = labels[v]
        if c < 0:
            continue
        rem = v
        for i in range(d):
            x[i] = lo_box[i] + rem // strides[i]
            rem = rem % strides[i]
        if first[c] < 0:
            first[c] = v
            lo[c] = x
            hi[c] = x
        else:
            for i in range(d):
                if x[i] < lo[c, i]:
                    lo[c, i] = x[i]
                if x[i] > hi[c, i]:
                    hi[c, i] = x[i]
        nv[c] += 1
    for e in range(occ.shape[0]):
        if occ[e] != 0:
            ne[labels[e // d]] += 1
    return labels, nv, ne, lo, hi, first, merges


def connected_components(edges: EdgeSet) -> Components:
    box = edges.box
    out = _label(edges.occupancy, box.dim, box.n_vertices,
                 np.array(box.lo, dtype=np.int64), np.array(box.shape, dtype=np.int64),
                 np.array(box.strides, dtype=np.int64))
    return Components(edges, *out[:6], merges=int(out[6]))


def bbox_diameter(stats: ClusterStats) -> float:
    """Euclidean length of the bounding-box extent ``hi - lo``."""
    lo, hi = stats.bbox
    return math.sqrt(sum((b - a) ** 2 for a, b in zip(lo, hi)))


def _ranked(comp: Components) -> np.ndarray:
    # larger first; ties go to the smaller first vertex (lexicographic order)
    return np.lexsort((comp.first_vertex, -comp.n_vertices))


def report_from_components(comp: Components) -> ClusterReport:
    order = _ranked(comp)
    largest = comp.stats(int(order[0])) if len(order) > 0 else None
    second = comp.stats(int(order[1])) if len(order) > 1 else None
    hist = dict(sorted(Counter(int(n) for n in comp.n_vertices).items()))
    return ClusterReport(comp.count, largest, second, hist)


def cluster_report(edges: EdgeSet) -> ClusterReport:
    return report_from_components(connected_components(edges))


def max_pairwise_distance(comp: Components, c: int, limit: int = 1000) -> float:
    """Exact Euclidean diameter of component ``c``; a debugging oracle, O(n^2)."""
    members = comp.members(c)
    if len(members) > limit:
        raise ValueError(f"component has {len(members)} vertices, above limit {limit}")
    box = comp.edges.box
    pts = np.array([box.point(int(v)) for v in members], dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=2)).max())
