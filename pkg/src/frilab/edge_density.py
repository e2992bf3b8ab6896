"""Probability that the edge e1 = {0, x1} is traversed by FRI at level (u, T).

The closed form needs four walk quantities, all relative to ``K = {0, x1}``:
escape probabilities from ``-x1`` and ``x2`` (``E1``, ``E2``), the escape
probability from ``0`` (``f = Es``), and the truncated return moment
``E_0[H; 1 <= H < inf]``.  A fiber started in ``K`` misses e1 with probability
``pF_0``, and ``p = 1 - exp(-4du f g)`` with ``g = 1 - pF_0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import rng as _rng
from .lattice import Box, EdgeSet
from .sampler import FriConfig, FriSample, batch_statistics, sample_fri_box_padded
from .walks import EstimateWithError, KilledWalkParams, edge_pair, hit_statistics, hitting_times, unit

DEFAULT_P_C = 0.2488  # bond percolation threshold of Z^3


@dataclass
class EdgeDensityInputs:
    E1: EstimateWithError
    E2: EstimateWithError
    Es: EstimateWithError
    return_moment: EstimateWithError
    cov_es_moment: float = 0.0  # Es and return_moment share their walks

    def check(self) -> None:
        for name in ("E1", "E2", "Es"):
            v = getattr(self, name).value
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} = {v} lies outside [0, 1]")
        if self.return_moment.value < 0:
            raise ValueError("return_moment must be nonnegative")


@dataclass
class ClosedFormResult:
    d: int
    u: float
    T: float
    a: float
    pF_minus_x1: float
    pF_x2: float
    pF_0: float
    g: float
    p: float
    p_stderr: float
    g_stderr: float

    def estimate(self, n_samples: int) -> EstimateWithError:
        return EstimateWithError(self.p, self.p_stderr, n_samples, {"method": "closed_form"})


def _require_dim(d: int) -> None:
    if d < 2:
        raise ValueError("the edge-density recursion needs d >= 2")


def estimate_inputs(rng: _rng.RngStream, d: int, T: float, n: int,
                    workers: int = 1) -> EdgeDensityInputs:
    """Monte Carlo inputs from ``n`` killed walks per start point.

    Starts ``-x1``, ``x2`` and ``0`` use substream groups 0, 1 and 2; Es and the
    return moment come from the same walks started at 0.
    """
    _require_dim(d)
    if n < 1:
        raise ValueError("n must be >= 1")
    params = KilledWalkParams(d, T)
    K = edge_pair(d)

    def escape(x, group):
        hits, s1, s2 = hit_statistics(rng, x, K, params, n, group=group, workers=workers)
        esc = n - hits
        return EstimateWithError.from_sums(esc, esc, n), s1, s2

    E1, _, _ = escape(unit(d, 1, -1), 0)
    E2, _, _ = escape(unit(d, 2), 1)
    Es, s1, s2 = escape((0,) * d, 2)
    rm = EstimateWithError.from_sums(s1, s2, n)
    # Cov(1{H = inf}, H 1{H < inf}) = -Es * E[H; H < inf]
    cov = -Es.value * rm.value / n
    return EdgeDensityInputs(E1, E2, Es, rm, cov)


def inputs_from_hitting_times(times: Sequence[np.ndarray], d: int, T: float) -> EdgeDensityInputs:
    """Inputs at level ``T`` from unkilled hitting times (-1 = no hit in the horizon).

    ``times`` holds the samples started at ``-x1``, ``x2`` and ``0``.  A killed
    walk survives until the hitting time ``h`` with probability ``q**h``, so
    ``Es = 1 - E[q**H]`` and the return moment is ``E[H q**H]``.  The result is
    smooth in ``T`` for a fixed sample, which suits finite differences.
    """
    _require_dim(d)
    log_q = -math.log1p(1.0 / T)

    def weights(h):
        h = np.asarray(h)
        hit = h > 0
        w = np.zeros(h.shape)
        w[hit] = np.exp(h[hit] * log_q)
        return h, w

    def est(x):
        n = len(x)
        return EstimateWithError(float(x.mean()), float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0, n)

    _, w1 = weights(times[0])
    _, w2 = weights(times[1])
    h0, w0 = weights(times[2])
    es = 1.0 - w0
    rm = np.where(h0 > 0, h0, 0) * w0
    n0 = len(h0)
    cov = float(np.cov(es, rm)[0, 1] / n0) if n0 > 1 else 0.0
    return EdgeDensityInputs(est(1.0 - w1), est(1.0 - w2), est(es), est(rm), cov)


def sample_hitting_times(rng: _rng.RngStream, d: int, n: int, horizon: int,
                         workers: int = 1) -> list[np.ndarray]:
    """Unkilled hitting times of ``{0, x1}`` from ``-x1``, ``x2`` and ``0``."""
    _require_dim(d)
    K = edge_pair(d)
    starts = (unit(d, 1, -1), unit(d, 2), (0,) * d)
    return [hitting_times(rng, x, K, d, n, horizon, group=g, workers=workers)
            for g, x in enumerate(starts)]


def closed_form(inputs: EdgeDensityInputs, d: int, u: float, T: float) -> ClosedFormResult:
    _require_dim(d)
    if not (u > 0 and T > 0):
        raise ValueError("u and T must be positive")
    inputs.check()
    E1, E2, f = inputs.E1.value, inputs.E2.value, inputs.Es.value
    two_d = 2 * d
    a = ((two_d - 2) * E2 + E1 + 1) / two_d
    den = a * T + 1
    pF_m = (((two_d - 2) * E2 + 2 * E1) / two_d * T + 1) / den
    pF_x2 = (((two_d - 1) * E2 + E1) / two_d * T + 1) / den
    pF_0 = (((two_d - 2) * E2 + E1) / two_d * T + 1) / den
    g = (T / two_d) / den
    lam = 4 * d * u * f * g
    p = -math.expm1(-lam)

    # delta method; E1, E2, Es come from independent walks
    dg_da = -(T / two_d) * T / den ** 2
    var_a = (inputs.E1.stderr / two_d) ** 2 + ((two_d - 2) * inputs.E2.stderr / two_d) ** 2
    var_g = dg_da ** 2 * var_a
    dp_dlam = math.exp(-lam)
    var_p = (dp_dlam * 4 * d * u) ** 2 * (g ** 2 * inputs.Es.stderr ** 2 + f ** 2 * var_g)
    return ClosedFormResult(d, u, T, a, pF_m, pF_x2, pF_0, g, p, math.sqrt(var_p), math.sqrt(var_g))


def fg_derivative_estimate(inputs: EdgeDensityInputs, d: int, T: float) -> EstimateWithError:
    """(f g)'(T) with a delta-method standard error."""
    _require_dim(d)
    inputs.check()
    c = 1.0 / (2 * d)
    E1, E2 = inputs.E1.value, inputs.E2.value
    es, rm = inputs.Es.value, inputs.return_moment.value
    a = ((2 * d - 2) * E2 + E1 + 1) * c
    den = a * T + 1
    value = c / den ** 2 * (es - den / (T + 1) * rm)
    d_es = c / den ** 2
    d_rm = -c / (den * (T + 1))
    d_a = -2 * c * T * es / den ** 3 + c * T * rm / ((T + 1) * den ** 2)
    var = (d_es * inputs.Es.stderr) ** 2 + (d_rm * inputs.return_moment.stderr) ** 2
    var += 2 * d_es * d_rm * inputs.cov_es_moment
    var += d_a ** 2 * ((c * inputs.E1.stderr) ** 2 + ((2 * d - 2) * c * inputs.E2.stderr) ** 2)
    n = min(inputs.Es.n_samples, inputs.E1.n_samples, inputs.E2.n_samples)
    return EstimateWithError(value, math.sqrt(max(var, 0.0)), n, {"d": d, "T": T})


def fg_derivative(inputs: EdgeDensityInputs, d: int, T: float) -> float:
    """(f g)'(T); it has the sign of dp/dT because p = 1 - exp(-4du f g)."""
    return fg_derivative_estimate(inputs, d, T).value


def fd_check(times: Sequence[np.ndarray], d: int, u: float, T: float, dT: float = 1e-2):
    """Central difference of the closed-form p next to the analytic derivative.

    Both use inputs computed from the same hitting-time sample, so the
    difference quotient is smooth.  Returns ``(fd_dp_dT, analytic_dp_dT)``.
    """
    lo = closed_form(inputs_from_hitting_times(times, d, T - dT), d, u, T - dT).p
    hi = closed_form(inputs_from_hitting_times(times, d, T + dT), d, u, T + dT).p
    inputs = inputs_from_hitting_times(times, d, T)
    cf = closed_form(inputs, d, u, T)
    lam = -math.log1p(-cf.p)
    analytic = math.exp(-lam) * 4 * d * u * fg_derivative(inputs, d, T)
    return (hi - lo) / (2 * dT), analytic


def edge_density_direct(rng: _rng.RngStream, d: int, u: float, T: float, n_reps: int,
                        workers: int = 1) -> EstimateWithError:
    """Empirical frequency with which e1 is traversed.

    Each replicate samples the fibers that hit ``K = {0, x1}``: both endpoints
    get ``Poisson(2du)`` proposals, a proposal is kept when an auxiliary killed
    walk from it never returns to ``K``, and each kept proposal starts a fresh
    fiber.  This is the boundary scheme of the exact box sampler applied to the
    one-edge box ``K``, so replicate ``r`` uses substream ``r`` of ``rng``.
    """
    _require_dim(d)
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    box = Box((0,) * d, unit(d, 1))
    config = FriConfig(d, u, T, box, mode="exact", master_seed=rng.master_seed)
    stats = batch_statistics(config, n_reps, key=rng.key, workers=workers,
                             chunk=max(1000, -(-n_reps // 64)))
    hits = int(stats.occupied[0])
    return EstimateWithError.from_sums(hits, hits, n_reps, method="direct")


def bernoulli_coupling(u: float, T: float, p_c: float = DEFAULT_P_C) -> tuple[float, bool]:
    """Density of good edges and whether it reaches the Bernoulli threshold ``p_c``."""
    if not 0 < p_c < 1:
        raise ValueError("p_c must lie in (0, 1)")
    if not (u > 0 and T > 0):
        raise ValueError("u and T must be positive")
    x = u * T / (T + 1) ** 2
    density = -math.expm1(-2 * x)
    return density, x >= -math.log1p(-p_c) / 2


def good_edges(sample: FriSample) -> EdgeSet:
    """Edges whose first jump was taken by some fiber started at one of their endpoints."""
    if sample.first_plus is None:
        raise ValueError("sample was drawn without record_first_steps")
    box = sample.edges.box
    occ = ((sample.first_plus + sample.first_minus) > 0) & box.valid_edge_mask()
    return EdgeSet(box, occ.astype(np.uint8))


def sample_coupled_good_edges(config: FriConfig, rng) -> tuple[FriSample, EdgeSet]:
    if config.mode != "padded":
        raise ValueError("the good-edge coupling is recorded by the padded sampler")
    sample = sample_fri_box_padded(config.with_params(record_first_steps=True), rng)
    return sample, good_edges(sample)
