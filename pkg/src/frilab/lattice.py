"""Hypercubic lattice geometry: points, canonical edges, boxes and edge sets."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

Point = tuple  # d-tuple of ints


@dataclass(frozen=True, order=True)
class EdgeId:
    """Undirected nearest-neighbour edge ``{base, base + x_axis}``.

    ``axis`` is 1-based; ``base`` is the endpoint with the smaller coordinate
    along that axis.
    """

    base: Point
    axis: int

    @property
    def endpoints(self) -> tuple[Point, Point]:
        other = list(self.base)
        other[self.axis - 1] += 1
        return self.base, tuple(other)


def canonical_edge(a: Iterable[int], b: Iterable[int]) -> EdgeId:
    a = tuple(int(x) for x in a)
    b = tuple(int(x) for x in b)
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {a} vs {b}")
    diff = [y - x for x, y in zip(a, b)]
    if sum(abs(t) for t in diff) != 1:
        raise ValueError(f"{a} and {b} are not nearest neighbours")
    axis = next(i for i, t in enumerate(diff) if t != 0)
    base = a if diff[axis] == 1 else b
    return EdgeId(base, axis + 1)


def neighbours(p: Point) -> Iterator[Point]:
    for i in range(len(p)):
        for s in (-1, 1):
            q = list(p)
            q[i] += s
            yield tuple(q)


@dataclass(frozen=True)
class Box:
    """Axis-aligned lattice box ``[lo, hi]`` (inclusive corners)."""

    lo: Point
    hi: Point

    def __post_init__(self):
        lo = tuple(int(x) for x in self.lo)
        hi = tuple(int(x) for x in self.hi)
        if len(lo) != len(hi):
            raise ValueError("lo and hi have different dimensions")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"empty box: lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, d: int, n: int, origin: int = 0) -> "Box":
        """The box ``[origin, origin + n]^d``: side ``n`` edges, ``n + 1`` vertices."""
        return cls((origin,) * d, (origin + n,) * d)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @property
    def n_vertices(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def strides(self) -> tuple[int, ...]:
        # row-major: last coordinate varies fastest
        s = [1] * self.dim
        for i in range(self.dim - 2, -1, -1):
            s[i] = s[i + 1] * self.shape[i + 1]
        return tuple(s)

    def contains(self, p: Point) -> bool:
        return all(a <= x <= b for a, x, b in zip(self.lo, p, self.hi))

    def index(self, p: Point) -> int:
        if not self.contains(p):
            raise ValueError(f"{p} is outside {self}")
        return sum((x - a) * s for x, a, s in zip(p, self.lo, self.strides))

    def point(self, idx: int) -> Point:
        out = []
        for a, s in zip(self.lo, self.strides):
            q, idx = divmod(idx, s)
            out.append(a + q)
        return tuple(out)

    def points(self) -> Iterator[Point]:
        return itertools.product(*(range(a, b + 1) for a, b in zip(self.lo, self.hi)))

    def padded(self, m: int) -> "Box":
        return Box(tuple(a - m for a in self.lo), tuple(b + m for b in self.hi))

    def coords(self) -> np.ndarray:
        """(n_vertices, d) int64 array of vertex coordinates in index order."""
        grids = np.meshgrid(*(np.arange(a, b + 1) for a, b in zip(self.lo, self.hi)), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)

    def interior_mask(self) -> np.ndarray:
        """True for vertices whose 2d neighbours all lie in the box."""
        c = self.coords()
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((c > lo) & (c < hi), axis=1)

    def edge_index(self, e: EdgeId) -> int:
        a, b = e.endpoints
        if not (self.contains(a) and self.contains(b)):
            raise ValueError(f"{e} is not inside {self}")
        return self.index(a) * self.dim + (e.axis - 1)

    def edge_from_index(self, k: int) -> EdgeId:
        v, axis = divmod(int(k), self.dim)
        return EdgeId(self.point(v), axis + 1)

    def n_edges(self) -> int:
        """Number of nearest-neighbour edges with both endpoints in the box."""
        shape = self.shape
        total = 0
        for i in range(self.dim):
            n = 1
            for j, s in enumerate(shape):
                n *= s - 1 if j == i else s
            total += n
        return total

    def valid_edge_mask(self) -> np.ndarray:
        """(n_vertices * d,) bool; True where slot ``v*d + axis`` is a real in-box edge."""
        c = self.coords()
        return (c < np.asarray(self.hi)).ravel()

    def center(self) -> Point:
        return tuple((a + b) // 2 for a, b in zip(self.lo, self.hi))


def boundary_sets(box: Box) -> tuple[set, set]:
    """Inner and outer vertex boundaries of ``box``."""
    inner = set()
    outer = set()
    lo, hi = box.lo, box.hi
    for p in box.points():
        if any(x == a or x == b for x, a, b in zip(p, lo, hi)):
            inner.add(p)
            for q in neighbours(p):
                if not box.contains(q):
                    outer.add(q)
    return inner, outer


@dataclass
class EdgeSet:
    """Occupied edges inside a box, stored densely as ``vertex_index * d + axis``.

    ``multiplicity`` (fibers traversing each edge) is kept only on request.
    """

    box: Box
    occupancy: np.ndarray = field(repr=False)
    multiplicity: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def empty(cls, box: Box, with_multiplicity: bool = False) -> "EdgeSet":
        n = box.n_vertices * box.dim
        mult = np.zeros(n, dtype=np.int32) if with_multiplicity else None
        return cls(box, np.zeros(n, dtype=np.uint8), mult)

    @classmethod
    def from_edges(cls, box: Box, edges: Iterable[EdgeId]) -> "EdgeSet":
        es = cls.empty(box)
        for e in edges:
            es.add(e)
        return es

    def add(self, e: EdgeId, count: int = 1) -> None:
        k = self.box.edge_index(e)
        self.occupancy[k] = 1
        if self.multiplicity is not None:
            self.multiplicity[k] += count

    def __contains__(self, e: EdgeId) -> bool:
        a, b = e.endpoints
        if not (self.box.contains(a) and self.box.contains(b)):
            return False
        return bool(self.occupancy[self.box.edge_index(e)])

    def __len__(self) -> int:
        return int(np.count_nonzero(self.occupancy))

    def edges(self) -> Iterator[EdgeId]:
        for k in np.flatnonzero(self.occupancy):
            yield self.box.edge_from_index(int(k))

    def issubset(self, other: "EdgeSet") -> bool:
        if other.box != self.box:
            raise ValueError("edge sets live in different boxes")
        return not np.any((self.occupancy != 0) & (other.occupancy == 0))

    def check(self) -> None:
        """Raise if an occupied slot is not a real in-box edge or multiplicities disagree."""
        valid = self.box.valid_edge_mask()
        if np.any((self.occupancy != 0) & ~valid):
            raise AssertionError("occupied slot outside the box")
        if self.multiplicity is not None:
            if np.any((self.multiplicity > 0) != (self.occupancy != 0)):
                raise AssertionError("occupancy and multiplicity disagree")
