"""Finitary random interlacements restricted to a finite box.

Two independent mechanisms produce ``FRI ∩ box``:

* ``exact``: fibers are started only inside the box, with intensity
  ``u * 2d * Es_K(x)``.  Interior vertices have ``Es_K = 1/(T+1)`` and get
  ``Poisson(2du/(T+1))`` fibers directly.  Inner-boundary vertices get
  ``Poisson(2du)`` proposals; each proposal runs an auxiliary killed walk and
  is accepted iff that walk never returns to the box, after which a fresh
  fiber is drawn.  No truncation is involved.
* ``padded``: fibers start everywhere with ``Poisson(2du/(T+1))`` per vertex.
  A fiber started at l1-distance ``r >= 1`` from the box can only traverse an
  in-box edge if its lifetime exceeds ``r``; such fibers form a Poisson family
  of mean ``2du/(T+1) * q**(r+1)`` per vertex, and their remaining lifetime is
  again geometric.  Start points further than the padding margin are dropped; the
  expected number of dropped fibers that could reach the box is below
  ``padding_tol``.

Both trace only edges with both endpoints in the box and stop a walk as soon
as its remaining lifetime is shorter than its l1-distance to the box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from numba import njit

from . import rng as _rng
from .lattice import Box, EdgeSet
from .parallel import pmap
from .walks import as_state

MODES = ("exact", "padded")
FIBER_BUDGET = 50_000_000


class ResourceError(RuntimeError):
    """A requested run exceeds a configured memory or work budget."""


@dataclass(frozen=True)
class FriConfig:
    d: int
    u: float
    T: float
    box: Box
    mode: str = "exact"
    padding_tol: float = 1e-3
    master_seed: int = 0
    keep_multiplicity: bool = False
    keep_trajectories: bool = False
    record_first_steps: bool = False

    def __post_init__(self):
        if self.box.dim != self.d:
            raise ValueError(f"box dimension {self.box.dim} != d = {self.d}")
        if self.d < 1:
            raise ValueError("d must be positive")
        if not self.u > 0:
            raise ValueError("u must be positive")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError("T must be positive and finite")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0 < self.padding_tol < 1:
            raise ValueError("padding_tol must lie in (0, 1)")

    @property
    def q(self) -> float:
        return self.T / (self.T + 1.0)

    @property
    def inv_log_q(self) -> float:
        return -1.0 / math.log1p(1.0 / self.T)

    @property
    def rate(self) -> float:
        """Mean number of fibers started at each vertex, 2du/(T+1)."""
        return 2 * self.d * self.u / (self.T + 1.0)

    def with_params(self, **kw) -> "FriConfig":
        return replace(self, **kw)


@dataclass
class FriSample:
    edges: EdgeSet
    fiber_count: int
    starts: np.ndarray  # fibers started (accepted) at each box vertex, index order
    outside_fibers: int = 0  # padded mode: fibers started outside the box that were traced
    proposals: int = 0  # exact mode: Poisson(2du) proposals at boundary vertices
    accepted: int = 0  # exact mode: proposals whose auxiliary walk escaped
    first_plus: Optional[np.ndarray] = None  # per edge slot, first jumps from the lower endpoint
    first_minus: Optional[np.ndarray] = None  # per edge slot, first jumps from the upper endpoint
    trajectories: Optional[list] = field(default=None, repr=False)

    def per_vertex_starts(self) -> dict:
        box = self.edges.box
        return {box.point(int(i)): int(self.starts[i]) for i in np.flatnonzero(self.starts)}


# ---------------------------------------------------------------- margins


def padding_margin(T: float, tol: float) -> int:
    """Smallest m >= 0 with (T/(T+1))**m <= tol."""
    if tol >= 1:
        return 0
    if not tol > 0:
        raise ValueError("tol must be positive")
    log_q = -math.log1p(1.0 / T)
    m = max(0, math.ceil(math.log(tol) / log_q))
    # guard the float rounding at the boundary
    while m > 0 and (m - 1) * log_q <= math.log(tol):
        m -= 1
    while m * log_q > math.log(tol):
        m += 1
    return m


def padded_margin(config: FriConfig) -> int:
    """Margin m with q**m <= padding_tol / |box padded by m| (union bound over start points)."""
    m = 0
    for _ in range(200):
        vol = config.box.padded(m).n_vertices
        m_new = padding_margin(config.T, config.padding_tol / vol)
        if m_new <= m:
            return m
        m = m_new
    return m


def shell_counts(shape, m: int) -> np.ndarray:
    """W[i, r]: points of coordinates i..d-1 at total l1-excess r from the box, r <= m.

    Each coordinate is either inside (``shape[i]`` choices, excess 0) or
    outside on one of two sides with excess >= 1.  ``W[0, r]`` is the number of
    lattice points at l1-distance exactly r from the box.
    """
    d = len(shape)
    W = np.zeros((d + 1, m + 1))
    W[d, 0] = 1.0
    for i in range(d - 1, -1, -1):
        nxt = W[i + 1]
        cum = np.concatenate(([0.0], np.cumsum(nxt)))
        for r in range(m + 1):
            # sum_{delta=1..r} nxt[r - delta] = cum[r]
            W[i, r] = shape[i] * nxt[r] + 2.0 * cum[r]
    return W


# ---------------------------------------------------------------- kernels


@njit(inline="always")
def _axis_excess(x, lo, hi):
    if x < lo:
        return lo - x
    if x > hi:
        return x - hi
    return 0


@njit(cache=True)
def _grow_codes(buf, need):
    if need <= buf.shape[0]:
        return buf
    new = np.empty(max(need, 2 * buf.shape[0]), dtype=buf.dtype)
    new[: buf.shape[0]] = buf
    return new


@njit(cache=True)
def _grow_rows(buf, need):
    if need <= buf.shape[0]:
        return buf
    new = np.empty((max(need, 2 * buf.shape[0]), buf.shape[1]), dtype=buf.dtype)
    new[: buf.shape[0]] = buf
    return new


@njit(inline="always")
def _trace(st, pos, length, lo, hi, strides, occ, mult, use_mult, stamp, fid, plus, minus,
           use_first, keep, codes, rows, n_rows, n_codes):
    """Walk a fiber of ``length`` steps from ``pos`` marking in-box edges.

    ``mult`` counts fibers, not crossings: ``stamp[e]`` remembers the last
    fiber id ``fid`` that was counted on edge ``e``.  Returns updated (codes,
    rows, n_rows, n_codes) for the optional trajectory store.  Stops early once
    the box is out of reach.
    """
    d = pos.shape[0]
    two_d = 2 * d
    dist = 0
    lin = 0
    for i in range(d):
        dist += _axis_excess(pos[i], lo[i], hi[i])
        lin += (pos[i] - lo[i]) * strides[i]
    if keep:
        rows = _grow_rows(rows, n_rows + 1)
        for i in range(d):
            rows[n_rows, i] = pos[i]
        rows[n_rows, d] = n_codes
        rows[n_rows, d + 1] = 0
    remaining = length
    taken = 0
    while remaining > dist:
        k = _rng.next_below(st, two_d)
        ax = k >> 1
        old = pos[ax]
        up = (k & 1) == 1
        new = old + 1 if up else old - 1
        old_ex = _axis_excess(old, lo[ax], hi[ax])
        new_ex = _axis_excess(new, lo[ax], hi[ax])
        was_in = dist == 0
        dist += new_ex - old_ex
        pos[ax] = new
        if up:
            if was_in and dist == 0:
                e = lin * d + ax
                occ[e] = 1
                if use_mult and stamp[e] != fid:
                    stamp[e] = fid
                    mult[e] += 1
                if use_first and taken == 0:
                    plus[e] += 1
            lin += strides[ax]
        else:
            lin -= strides[ax]
            if was_in and dist == 0:
                e = lin * d + ax
                occ[e] = 1
                if use_mult and stamp[e] != fid:
                    stamp[e] = fid
                    mult[e] += 1
                if use_first and taken == 0:
                    minus[e] += 1
        if keep:
            codes = _grow_codes(codes, n_codes + 1)
            codes[n_codes] = k
            n_codes += 1
        taken += 1
        remaining -= 1
    if keep:
        rows[n_rows, d + 1] = taken
        n_rows += 1
    return codes, rows, n_rows, n_codes


@njit(inline="always")
def _escapes(st, pos, length, lo, hi):
    """Whether a walk of ``length`` steps from ``pos`` avoids the box at all times >= 1."""
    d = pos.shape[0]
    two_d = 2 * d
    dist = 0
    for i in range(d):
        dist += _axis_excess(pos[i], lo[i], hi[i])
    remaining = length
    while remaining > 0:
        if remaining < dist:
            return True
        k = _rng.next_below(st, two_d)
        ax = k >> 1
        old = pos[ax]
        new = old + 1 if (k & 1) else old - 1
        dist += _axis_excess(new, lo[ax], hi[ax]) - _axis_excess(old, lo[ax], hi[ax])
        pos[ax] = new
        if dist == 0:
            return False
        remaining -= 1
    return True


@njit(cache=True)
def _sample_exact(arr, coords, interior, lo, hi, strides, rate_in, rate_prop, inv_log_q,
                  occ, mult, use_mult, plus, minus, use_first, starts, keep):
    st = arr[0]
    d = lo.shape[0]
    pos = np.empty(d, dtype=np.int64)
    stamp = np.zeros(mult.shape[0], dtype=np.int64)
    fid = 0
    codes = np.empty(64 if keep else 1, dtype=np.int8)
    rows = np.empty((16 if keep else 1, d + 2), dtype=np.int64)
    n_rows = 0
    n_codes = 0
    fibers = 0
    proposals = 0
    accepted = 0
    for v in range(coords.shape[0]):
        if interior[v]:
            n = _rng.poisson(st, rate_in)
            for _ in range(n):
                length = _rng.geometric(st, inv_log_q)
                pos[:] = coords[v]
                fid += 1
                codes, rows, n_rows, n_codes = _trace(
                    st, pos, length, lo, hi, strides, occ, mult, use_mult, stamp, fid, plus,
                    minus, use_first, keep, codes, rows, n_rows, n_codes)
            starts[v] += n
            fibers += n
        else:
            n = _rng.poisson(st, rate_prop)
            proposals += n
            for _ in range(n):
                pos[:] = coords[v]
                if _escapes(st, pos, _rng.geometric(st, inv_log_q), lo, hi):
                    accepted += 1
                    length = _rng.geometric(st, inv_log_q)
                    pos[:] = coords[v]
                    fid += 1
                    codes, rows, n_rows, n_codes = _trace(
                        st, pos, length, lo, hi, strides, occ, mult, use_mult, stamp, fid, plus,
                        minus, use_first, keep, codes, rows, n_rows, n_codes)
                    starts[v] += 1
                    fibers += 1
    return fibers, proposals, accepted, codes[:n_codes], rows[:n_rows]


@njit(cache=True)
def _point_at_distance(st, r, lo, hi, shape, W, pos):
    """Uniform lattice point at l1-distance exactly r from the box (sequential DP draw)."""
    d = lo.shape[0]
    rho = r
    for i in range(d):
        total = W[i, rho]
        x = _rng.next_double(st) * total
        acc = shape[i] * W[i + 1, rho]
        if x <= acc or rho == 0:
            pos[i] = lo[i] + _rng.next_below(st, shape[i])
            continue
        chosen = rho
        for delta in range(1, rho + 1):
            acc += 2.0 * W[i + 1, rho - delta]
            if x <= acc:
                chosen = delta
                break
        # float round-off can leave x just above the final sum; the last
        # candidate must keep the remaining coordinates feasible
        while W[i + 1, rho - chosen] == 0.0:
            chosen -= 1
        if _rng.next_below(st, 2) == 0:
            pos[i] = lo[i] - chosen
        else:
            pos[i] = hi[i] + chosen
        rho -= chosen


@njit(cache=True)
def _sample_padded(arr, coords, lo, hi, shape, strides, rate, inv_log_q, log_q, W, margin,
                   occ, mult, use_mult, plus, minus, use_first, starts, keep):
    st = arr[0]
    d = lo.shape[0]
    pos = np.empty(d, dtype=np.int64)
    stamp = np.zeros(mult.shape[0], dtype=np.int64)
    fid = 0
    codes = np.empty(64 if keep else 1, dtype=np.int8)
    rows = np.empty((16 if keep else 1, d + 2), dtype=np.int64)
    n_rows = 0
    n_codes = 0
    fibers = 0
    for v in range(coords.shape[0]):
        n = _rng.poisson(st, rate)
        for _ in range(n):
            length = _rng.geometric(st, inv_log_q)
            pos[:] = coords[v]
            fid += 1
            codes, rows, n_rows, n_codes = _trace(
                st, pos, length, lo, hi, strides, occ, mult, use_mult, stamp, fid, plus, minus,
                use_first, keep, codes, rows, n_rows, n_codes)
        starts[v] += n
        fibers += n
    outside = 0
    for r in range(1, margin + 1):
        mean = rate * math.exp((r + 1) * log_q) * W[0, r]
        n = _rng.poisson(st, mean)
        for _ in range(n):
            _point_at_distance(st, r, lo, hi, shape, W, pos)
            length = r + 1 + _rng.geometric(st, inv_log_q)
            fid += 1
            codes, rows, n_rows, n_codes = _trace(
                st, pos, length, lo, hi, strides, occ, mult, use_mult, stamp, fid, plus, minus,
                use_first, keep, codes, rows, n_rows, n_codes)
        outside += n
    return fibers, outside, codes[:n_codes], rows[:n_rows]


# ---------------------------------------------------------------- public API


def _buffers(config: FriConfig):
    box = config.box
    n_slots = box.n_vertices * box.dim
    occ = np.zeros(n_slots, dtype=np.uint8)
    mult = np.zeros(n_slots if config.keep_multiplicity else 1, dtype=np.int32)
    plus = np.zeros(n_slots if config.record_first_steps else 1, dtype=np.int32)
    minus = np.zeros(n_slots if config.record_first_steps else 1, dtype=np.int32)
    starts = np.zeros(box.n_vertices, dtype=np.int32)
    return occ, mult, plus, minus, starts


@lru_cache(maxsize=32)
def _geometry(box: Box):
    """Read-only arrays describing ``box``: lo, hi, shape, strides, coords, interior."""
    arrays = (np.array(box.lo, dtype=np.int64), np.array(box.hi, dtype=np.int64),
              np.array(box.shape, dtype=np.int64), np.array(box.strides, dtype=np.int64),
              box.coords(), box.interior_mask())
    for a in arrays:
        a.flags.writeable = False
    return arrays


@lru_cache(maxsize=64)
def _padding(config: FriConfig):
    m = padded_margin(config)
    W = shell_counts(config.box.shape, m)
    reach = config.q ** (np.arange(m + 1) + 1.0)
    reach[0] = 1.0
    expected = config.rate * float(np.sum(W[0] * reach))
    return m, W, expected


def _trajectories(codes, rows, d):
    out = []
    for row in rows:
        start = tuple(int(c) for c in row[:d])
        off, n = int(row[d]), int(row[d + 1])
        out.append((start, codes[off:off + n].copy()))
    return out


def _finish(config, occ, mult, plus, minus, starts, fibers, codes, rows, **extra) -> FriSample:
    edges = EdgeSet(config.box, occ, mult if config.keep_multiplicity else None)
    return FriSample(
        edges=edges,
        fiber_count=int(fibers),
        starts=starts,
        first_plus=plus if config.record_first_steps else None,
        first_minus=minus if config.record_first_steps else None,
        trajectories=_trajectories(codes, rows, config.d) if config.keep_trajectories else None,
        **extra,
    )


def sample_fri_box_exact(config: FriConfig, rng) -> FriSample:
    lo, hi, _, strides, coords, interior = _geometry(config.box)
    occ, mult, plus, minus, starts = _buffers(config)
    fibers, proposals, accepted, codes, rows = _sample_exact(
        as_state(rng), coords, interior, lo, hi, strides,
        config.rate, 2 * config.d * config.u, config.inv_log_q,
        occ, mult, config.keep_multiplicity, plus, minus, config.record_first_steps,
        starts, config.keep_trajectories)
    return _finish(config, occ, mult, plus, minus, starts, fibers, codes, rows,
                   proposals=int(proposals), accepted=int(accepted))


def expected_padded_fibers(config: FriConfig) -> float:
    """Mean number of fibers the padded sampler traces per sample."""
    return _padding(config)[2]


def sample_fri_box_padded(config: FriConfig, rng) -> FriSample:
    m, W, expected = _padding(config)
    if expected > FIBER_BUDGET:
        raise ResourceError(
            f"padded sampling would trace ~{expected:.3g} fibers per sample "
            f"(budget {FIBER_BUDGET}); use mode='exact' or a larger padding_tol")
    lo, hi, shape, strides, coords, _ = _geometry(config.box)
    occ, mult, plus, minus, starts = _buffers(config)
    fibers, outside, codes, rows = _sample_padded(
        as_state(rng), coords, lo, hi, shape, strides, config.rate, config.inv_log_q,
        -math.log1p(1.0 / config.T), W, m,
        occ, mult, config.keep_multiplicity, plus, minus, config.record_first_steps,
        starts, config.keep_trajectories)
    return _finish(config, occ, mult, plus, minus, starts, fibers + outside, codes, rows,
                   outside_fibers=int(outside))


def sample_fri(config: FriConfig, rng) -> FriSample:
    if config.mode == "exact":
        return sample_fri_box_exact(config, rng)
    return sample_fri_box_padded(config, rng)


def replicate_stream(config: FriConfig, key=None) -> _rng.RngStream:
    return _rng.RngStream(config.master_seed, key or (_rng.FRI, 0, 0))


def _replicate_chunk(job):
    config, key, reps, reducer = job
    stream = _rng.RngStream(config.master_seed, key)
    return [reducer(sample_fri(config, stream.state(r))) for r in reps]


def run_replicates(config: FriConfig, n_reps: int, reducer: Callable[[FriSample], object],
                   workers: int = 1, key=None, chunk: int = 16) -> list:
    """Per-replicate statistics ``[reducer(sample_r) for r in range(n_reps)]``.

    Replicate ``r`` always draws from substream ``r`` of the stream ``key``, so
    the list is identical for any ``workers``.  ``reducer`` must be picklable
    when ``workers > 1``; callers combine the list in its fixed order.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    key = key or (_rng.FRI, 0, 0)
    jobs = [(config, key, range(a, min(a + chunk, n_reps)), reducer) for a in range(0, n_reps, chunk)]
    out = []
    for part in pmap(_replicate_chunk, jobs, workers):
        out.extend(part)
    return out


# ---------------------------------------------------------------- batched statistics


@dataclass
class BatchStats:
    """Sums over replicates ``r0 .. r1-1`` of one configuration."""

    n_reps: int
    occupied: np.ndarray  # per edge slot, replicates in which the edge is occupied
    start_sum: np.ndarray  # per box vertex, sum of fiber starts
    start_sq: np.ndarray  # per box vertex, sum of squared fiber starts
    fibers: np.ndarray  # per replicate fiber count
    good: Optional[np.ndarray] = None  # per edge slot, replicates in which the edge is good
    plus_sum: Optional[np.ndarray] = None  # per edge slot, sum of N_{e,+}
    good_per_rep: Optional[np.ndarray] = None  # per replicate number of good in-box edges
    good_not_occupied: Optional[np.ndarray] = None  # per replicate subset violations

    def merge(self, other: "BatchStats") -> "BatchStats":
        def cat(a, b, f):
            return None if a is None else f(a, b)

        add = np.add
        return BatchStats(
            self.n_reps + other.n_reps,
            self.occupied + other.occupied,
            self.start_sum + other.start_sum,
            self.start_sq + other.start_sq,
            np.concatenate([self.fibers, other.fibers]),
            cat(self.good, other.good, add),
            cat(self.plus_sum, other.plus_sum, add),
            cat(self.good_per_rep, other.good_per_rep, lambda a, b: np.concatenate([a, b])),
            cat(self.good_not_occupied, other.good_not_occupied, lambda a, b: np.concatenate([a, b])),
        )


@njit(cache=True)
def _batch(exact, seed, packed, r0, r1, coords, interior, lo, hi, shape, strides, rate,
           rate_prop, inv_log_q, log_q, W, margin, use_first, valid):
    n_slots = coords.shape[0] * lo.shape[0]
    n_v = coords.shape[0]
    occ = np.zeros(n_slots, dtype=np.uint8)
    mult = np.zeros(1, dtype=np.int32)
    plus = np.zeros(n_slots if use_first else 1, dtype=np.int32)
    minus = np.zeros(n_slots if use_first else 1, dtype=np.int32)
    starts = np.zeros(n_v, dtype=np.int32)
    occupied = np.zeros(n_slots, dtype=np.int64)
    s1 = np.zeros(n_v, dtype=np.int64)
    s2 = np.zeros(n_v, dtype=np.int64)
    fibers = np.zeros(r1 - r0, dtype=np.int64)
    good = np.zeros(n_slots if use_first else 1, dtype=np.int64)
    plus_sum = np.zeros(n_slots if use_first else 1, dtype=np.int64)
    good_rep = np.zeros(r1 - r0, dtype=np.int64)
    bad_rep = np.zeros(r1 - r0, dtype=np.int64)
    for r in range(r0, r1):
        arr = _rng.init_state(seed, packed, r)
        occ[:] = 0
        starts[:] = 0
        if use_first:
            plus[:] = 0
            minus[:] = 0
        if exact:
            nf, _, _, _, _ = _sample_exact(arr, coords, interior, lo, hi, strides, rate, rate_prop,
                                           inv_log_q, occ, mult, False, plus, minus, use_first,
                                           starts, False)
        else:
            nf, no, _, _ = _sample_padded(arr, coords, lo, hi, shape, strides, rate, inv_log_q,
                                          log_q, W, margin, occ, mult, False, plus, minus,
                                          use_first, starts, False)
            nf += no
        fibers[r - r0] = nf
        for e in range(n_slots):
            occupied[e] += occ[e]
        for v in range(n_v):
            s1[v] += starts[v]
            s2[v] += starts[v] * starts[v]
        if use_first:
            for e in range(n_slots):
                if valid[e]:
                    plus_sum[e] += plus[e]
                    if plus[e] + minus[e] > 0:
                        good[e] += 1
                        good_rep[r - r0] += 1
                        if occ[e] == 0:
                            bad_rep[r - r0] += 1
    return occupied, s1, s2, fibers, good, plus_sum, good_rep, bad_rep


def _batch_job(job) -> BatchStats:
    config, key, r0, r1 = job
    lo, hi, shape, strides, coords, interior = _geometry(config.box)
    exact = config.mode == "exact"
    if exact:
        m, W = 0, np.zeros((config.d + 1, 1))
    else:
        m, W, expected = _padding(config)
        if expected > FIBER_BUDGET:
            raise ResourceError(f"padded sampling would trace ~{expected:.3g} fibers per sample")
    valid = config.box.valid_edge_mask()
    packed = _rng.pack_key(key)
    out = _batch(exact, np.uint64(config.master_seed), np.uint64(packed), r0, r1, coords,
                 interior, lo, hi, shape, strides, config.rate, 2 * config.d * config.u,
                 config.inv_log_q, -math.log1p(1.0 / config.T), W, m,
                 config.record_first_steps, valid)
    occupied, s1, s2, fibers, good, plus_sum, good_rep, bad_rep = out
    first = config.record_first_steps
    return BatchStats(r1 - r0, occupied, s1, s2, fibers,
                      good if first else None, plus_sum if first else None,
                      good_rep if first else None, bad_rep if first else None)


def batch_statistics(config: FriConfig, n_reps: int, key=None, workers: int = 1,
                     chunk: int = 1000) -> BatchStats:
    """Replicate sums computed inside one kernel per chunk.

    Replicate ``r`` uses substream ``r`` of ``key`` exactly as
    :func:`run_replicates` does, so both paths see the same samples.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    key = key or (_rng.FRI, 0, 0)
    jobs = [(config, key, a, min(a + chunk, n_reps)) for a in range(0, n_reps, chunk)]
    parts = pmap(_batch_job, jobs, workers)
    out = parts[0]
    for p in parts[1:]:
        out = out.merge(p)
    return out
