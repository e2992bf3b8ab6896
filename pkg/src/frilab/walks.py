"""Geometrically killed simple random walks and hitting-time estimators.

A killed walk with parameter ``T`` makes ``G_T`` steps, where
``P(G_T = k) = (T/(T+1))**k / (T+1)``; each step is uniform over the ``2d``
lattice directions.  Direction code ``k`` in ``[0, 2d)`` moves along axis
``k // 2``, downwards for even ``k`` and upwards for odd ``k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from numba import njit

from . import rng as _rng
from .lattice import Box, Point
from .parallel import pmap

CHUNK = 1 << 14


@dataclass(frozen=True)
class KilledWalkParams:
    d: int
    T: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if not self.T > 0:
            raise ValueError("T must be positive")

    @property
    def killed(self) -> bool:
        return math.isfinite(self.T)

    @property
    def q(self) -> float:
        """Survival probability per step, T/(T+1)."""
        return self.T / (self.T + 1.0) if self.killed else 1.0

    @property
    def inv_log_q(self) -> float:
        # log(T/(T+1)) = -log1p(1/T), accurate for large T
        return -1.0 / math.log1p(1.0 / self.T)


@dataclass
class Trajectory:
    start: Point
    steps: np.ndarray  # direction codes, int8

    def __len__(self) -> int:
        return len(self.steps)

    def vertices(self) -> np.ndarray:
        d = len(self.start)
        out = np.empty((len(self.steps) + 1, d), dtype=np.int64)
        out[0] = self.start
        delta = np.zeros((len(self.steps), d), dtype=np.int64)
        codes = self.steps.astype(np.int64)
        delta[np.arange(len(codes)), codes // 2] = 2 * (codes % 2) - 1
        out[1:] = out[0] + np.cumsum(delta, axis=0)
        return out


@dataclass
class EstimateWithError:
    value: float
    stderr: float
    n_samples: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("an estimate needs at least one sample")

    @classmethod
    def from_sums(cls, s1: float, s2: float, n: int, **meta) -> "EstimateWithError":
        mean = s1 / n
        if n > 1:
            var = max(s2 - n * mean * mean, 0.0) / (n - 1)
            se = math.sqrt(var / n)
        else:
            se = 0.0
        return cls(mean, se, n, dict(meta))

    def z(self, other: "EstimateWithError") -> float:
        """Separation in combined standard errors."""
        se = math.hypot(self.stderr, other.stderr)
        diff = self.value - other.value
        if se == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / se


def as_state(rng) -> np.ndarray:
    """Accept an ``RngStream`` (substream 0) or a live numba state array."""
    if isinstance(rng, _rng.RngStream):
        return rng.state()
    return rng


class Region:
    """Finite vertex set as bounding box plus dense mask, in numba-friendly arrays."""

    def __init__(self, points: Iterable[Point]):
        pts = np.array(sorted({tuple(int(c) for c in p) for p in points}), dtype=np.int64)
        if pts.ndim != 2 or len(pts) == 0:
            raise ValueError("region must contain at least one point")
        self.points = pts
        self.lo = pts.min(axis=0)
        self.hi = pts.max(axis=0)
        box = Box(tuple(self.lo), tuple(self.hi))
        if box.n_vertices > 50_000_000:
            raise MemoryError(f"region bounding box has {box.n_vertices} vertices")
        self.strides = np.array(box.strides, dtype=np.int64)
        self.mask = np.zeros(box.n_vertices, dtype=np.uint8)
        self.mask[(pts - self.lo) @ self.strides] = 1

    @classmethod
    def from_box(cls, box: Box) -> "Region":
        r = cls.__new__(cls)
        r.points = box.coords()
        r.lo = np.array(box.lo, dtype=np.int64)
        r.hi = np.array(box.hi, dtype=np.int64)
        r.strides = np.array(box.strides, dtype=np.int64)
        r.mask = np.ones(box.n_vertices, dtype=np.uint8)
        return r

    @property
    def d(self) -> int:
        return len(self.lo)

    def arrays(self):
        return self.lo, self.hi, self.strides, self.mask


def _region(A) -> Region:
    if isinstance(A, Region):
        return A
    if isinstance(A, Box):
        return Region.from_box(A)
    return Region(A)


# ---------------------------------------------------------------- kernels


@njit(cache=True)
def _locate(pos, lo, hi, strides):
    out = 0
    lin = 0
    for i in range(pos.shape[0]):
        if pos[i] < lo[i] or pos[i] > hi[i]:
            out += 1
        lin += (pos[i] - lo[i]) * strides[i]
    return out, lin


@njit(inline="always")
def first_hit(st, pos, length, lo, hi, strides, mask):
    """Walk ``length`` steps from ``pos`` (mutated); first n >= 1 with X_n in the set, else -1."""
    d = pos.shape[0]
    two_d = 2 * d
    out, lin = _locate(pos, lo, hi, strides)
    for n in range(1, length + 1):
        k = _rng.next_below(st, two_d)
        ax = k >> 1
        old = pos[ax]
        new = old + 1 if (k & 1) else old - 1
        pos[ax] = new
        was_out = old < lo[ax] or old > hi[ax]
        now_out = new < lo[ax] or new > hi[ax]
        out += np.int64(now_out) - np.int64(was_out)
        lin += strides[ax] if (k & 1) else -strides[ax]
        if out == 0 and mask[lin] != 0:
            return n
    return -1


@njit(cache=True)
def _walk_codes(arr, two_d, inv_log_q):
    st = arr[0]
    length = _rng.geometric(st, inv_log_q)
    codes = np.empty(length, dtype=np.int8)
    for i in range(length):
        codes[i] = _rng.next_below(st, two_d)
    return codes


@njit(cache=True)
def _hit_chunk(seed, packed, group, i0, n, start, inv_log_q, horizon, lo, hi, strides, mask):
    """Sums over walks i0 .. i0+n-1: (#hits, sum H 1{hit}, sum H^2 1{hit}).

    Walk ``i`` draws from its own substream ``(group, i)``: the same walk index
    sees the same uniforms for every ``T``, a monotone coupling in ``T``.
    """
    # the record view st = arr[0] needs arr to stay referenced, so the state
    # array is owned here and passed down
    return _hit_loop(_rng.init_state(seed, packed, 0), seed, packed, group, i0, n, start,
                     inv_log_q, horizon, lo, hi, strides, mask)


@njit(cache=True)
def _hit_loop(arr, seed, packed, group, i0, n, start, inv_log_q, horizon, lo, hi, strides, mask):
    st = arr[0]
    pos = np.empty(start.shape[0], dtype=np.int64)
    hits = 0
    s1 = 0.0
    s2 = 0.0
    for i in range(i0, i0 + n):
        _rng.reset(st, seed, packed, _rng.substream_id(group, i))
        if inv_log_q == 0.0:
            length = horizon
        else:
            length = _rng.geometric(st, inv_log_q)
            if horizon >= 0 and length > horizon:
                length = horizon
        pos[:] = start
        h = first_hit(st, pos, length, lo, hi, strides, mask)
        if h > 0:
            hits += 1
            s1 += h
            s2 += float(h) * h
    return hits, s1, s2


@njit(cache=True)
def _hit_times(seed, packed, group, i0, n, start, horizon, lo, hi, strides, mask):
    """First positive hitting time of unkilled walks up to ``horizon`` (-1 if none)."""
    return _times_loop(_rng.init_state(seed, packed, 0), seed, packed, group, i0, n, start,
                       horizon, lo, hi, strides, mask)


@njit(cache=True)
def _times_loop(arr, seed, packed, group, i0, n, start, horizon, lo, hi, strides, mask):
    st = arr[0]
    pos = np.empty(start.shape[0], dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    for i in range(i0, i0 + n):
        _rng.reset(st, seed, packed, _rng.substream_id(group, i))
        pos[:] = start
        out[i - i0] = first_hit(st, pos, horizon, lo, hi, strides, mask)
    return out


def _run_chunk(job):
    seed, packed, group, i0, n, start, inv_log_q, horizon, arrays = job
    return _hit_chunk(np.uint64(seed), np.uint64(packed), group, i0, n, start, inv_log_q,
                      horizon, *arrays)


def _run_times(job):
    seed, packed, group, i0, n, start, horizon, arrays = job
    return _hit_times(np.uint64(seed), np.uint64(packed), group, i0, n, start, horizon, *arrays)


def hit_statistics(rng: _rng.RngStream, x: Point, A, params: KilledWalkParams, n: int,
                   horizon: Optional[int] = None, group: int = 0, workers: int = 1):
    """Run ``n`` walks from ``x`` and return (#hits, sum H, sum H^2) over hits.

    Walk ``i`` uses substream ``(group, i)``, so results depend neither on
    ``workers`` nor on how the walks are chunked.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    region = _region(A)
    start = np.array(x, dtype=np.int64)
    if start.shape[0] != region.d:
        raise ValueError("start point and set have different dimensions")
    if params.killed:
        inv = params.inv_log_q
        hz = -1 if horizon is None else int(horizon)
    else:
        if horizon is None:
            raise ValueError("T = inf requires a finite horizon")
        inv = 0.0
        hz = int(horizon)
    jobs = [(rng.master_seed, rng.packed, group, i0, min(CHUNK, n - i0), start, inv, hz,
             region.arrays()) for i0 in range(0, n, CHUNK)]
    parts = pmap(_run_chunk, jobs, workers)
    hits = sum(int(p[0]) for p in parts)
    s1 = math.fsum(p[1] for p in parts)
    s2 = math.fsum(p[2] for p in parts)
    return hits, s1, s2


def hitting_times(rng: _rng.RngStream, x: Point, A, d: int, n: int, horizon: int,
                  group: int = 0, workers: int = 1) -> np.ndarray:
    """First positive hitting times of ``n`` unkilled walks truncated at ``horizon``.

    Killing is independent of the path, so for any ``T`` the killed walk hits at
    time ``h`` with conditional probability ``q**h``; these times therefore
    serve every ``T`` at once.
    """
    region = _region(A)
    start = np.array(x, dtype=np.int64)
    jobs = [(rng.master_seed, rng.packed, group, i0, min(CHUNK, n - i0), start, int(horizon),
             region.arrays()) for i0 in range(0, n, CHUNK)]
    return np.concatenate(pmap(_run_times, jobs, workers))


# ---------------------------------------------------------------- public API


def sample_killed_walk(rng, start: Point, params: KilledWalkParams) -> Trajectory:
    if not params.killed:
        raise ValueError("sampling a whole trajectory needs finite T")
    codes = _walk_codes(as_state(rng), 2 * params.d, params.inv_log_q)
    return Trajectory(tuple(int(c) for c in start), codes)


def hits_at_positive_time(traj: Trajectory, A) -> bool:
    """Whether X_n lies in A for some 1 <= n <= length (never for a length-0 walk)."""
    if len(traj) == 0:
        return False
    targets = {tuple(int(c) for c in p) for p in A}
    return any(tuple(int(c) for c in v) in targets for v in traj.vertices()[1:])


def estimate_escape_probability(rng, x: Point, A, params: KilledWalkParams, n: int,
                                group: int = 0, workers: int = 1) -> EstimateWithError:
    hits, _, _ = hit_statistics(rng, x, A, params, n, group=group, workers=workers)
    esc = n - hits
    return EstimateWithError.from_sums(esc, esc, n)


@dataclass
class CapacityEstimate(EstimateWithError):
    per_vertex: dict = field(default_factory=dict)


def estimate_capacity(rng, A, params: KilledWalkParams, n_per_vertex: int,
                      workers: int = 1) -> CapacityEstimate:
    """Killed capacity ``sum_x 2d Es(x)`` with per-vertex equilibrium measures."""
    region = _region(A)
    two_d = 2 * params.d
    per_vertex = {}
    total = 0.0
    var = 0.0
    for i, p in enumerate(region.points):
        x = tuple(int(c) for c in p)
        es = estimate_escape_probability(rng, x, region, params, n_per_vertex, group=i, workers=workers)
        per_vertex[x] = EstimateWithError(two_d * es.value, two_d * es.stderr, es.n_samples)
        total += two_d * es.value
        var += (two_d * es.stderr) ** 2
    return CapacityEstimate(total, math.sqrt(var), n_per_vertex * len(per_vertex),
                            per_vertex=per_vertex)


def estimate_return_moment(rng, x: Point, A, params: KilledWalkParams, n: int,
                           horizon: Optional[int] = None, group: int = 0,
                           workers: int = 1) -> EstimateWithError:
    """E_x[H ; 1 <= H < inf] for the killed walk, or its horizon-truncated analogue."""
    if not params.killed and horizon is None:
        raise ValueError("T = inf requires a finite horizon (truncated estimator)")
    _, s1, s2 = hit_statistics(rng, x, A, params, n, horizon=horizon, group=group, workers=workers)
    return EstimateWithError.from_sums(s1, s2, n, horizon=horizon)


def unit(d: int, axis: int, sign: int = 1) -> Point:
    p = [0] * d
    p[axis - 1] = sign
    return tuple(p)


def edge_pair(d: int) -> list:
    """The set {0, x_1}."""
    return [(0,) * d, unit(d, 1)]

