"""Exploration of the (u, T) plane: grid sweeps, hill climbing and log-log fits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats as _stats

from . import rng as _rng
from .clusters import cluster_report
from .lattice import Box
from .parallel import pmap
from .sampler import FriConfig, FriSample, ResourceError, sample_fri

STEP_BUDGET = 5e11  # walk steps a sweep may schedule


def _grid(lo: float, hi: float, step: float) -> tuple[float, ...]:
    n = int(math.floor((hi - lo) / step + 1e-9))
    return tuple(round(lo + k * step, 12) for k in range(n + 1))


@dataclass(frozen=True)
class SweepGrid:
    u_values: tuple
    T_values: tuple
    N: int
    reps: int = 100
    d: int = 3

    def __post_init__(self):
        object.__setattr__(self, "u_values", tuple(float(u) for u in self.u_values))
        object.__setattr__(self, "T_values", tuple(float(t) for t in self.T_values))
        if not self.u_values or not self.T_values:
            raise ValueError("grid must contain at least one u and one T")
        if any(not u > 0 for u in self.u_values) or any(not t > 0 for t in self.T_values):
            raise ValueError("grid values must be positive")
        if self.N < 1 or self.reps < 1:
            raise ValueError("N and reps must be >= 1")

    @classmethod
    def from_ranges(cls, u_range, du, T_range, dT, N, reps=100, d=3) -> "SweepGrid":
        if not (du > 0 and dT > 0):
            raise ValueError("spacings must be positive")
        return cls(_grid(*u_range, du), _grid(*T_range, dT), N, reps, d)

    @property
    def box(self) -> Box:
        return Box.cube(self.d, self.N)

    def points(self):
        for iu, u in enumerate(self.u_values):
            for iT, T in enumerate(self.T_values):
                yield iu, iT, u, T


@dataclass
class PhasePoint:
    u: float
    T: float
    reps: int
    mean_largest_size: float
    mean_largest_diam: float
    mean_second_size: float
    mean_second_diam: float
    se_largest_size: float = 0.0
    se_largest_diam: float = 0.0
    se_second_size: float = 0.0


def cluster_observables(sample: FriSample) -> tuple:
    """(largest size, largest diameter, second size, second diameter); absent clusters count as 0."""
    rep = cluster_report(sample.edges)
    out = []
    for c in (rep.largest, rep.second):
        out += [0, 0.0] if c is None else [c.size_vertices, c.bbox_diameter]
    return tuple(out)


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    return float(x.mean()), se


def expected_steps(config: FriConfig) -> float:
    """Rough walk-step count of one exact-mode sample: fibers times mean length."""
    return config.box.n_vertices * config.rate * (config.T + 1) * 2


def _sweep_job(job):
    config, key, reps = job
    stream = _rng.RngStream(config.master_seed, key)
    return [cluster_observables(sample_fri(config, stream.state(r))) for r in reps]


def sweep(grid: SweepGrid, template: FriConfig, rng: Optional[_rng.RngStream] = None,
          workers: int = 1, step_budget: float = STEP_BUDGET, chunk: int = 5) -> list[PhasePoint]:
    """Mean cluster observables at every grid point, rows ordered by (u, T).

    Replicate ``r`` of point ``(iu, iT)`` draws from substream ``r`` of the
    stream keyed ``(SWEEP, iu, iT)``.
    """
    seed = rng.master_seed if rng is not None else template.master_seed
    base = template.with_params(d=grid.d, box=grid.box, master_seed=seed)
    jobs = []
    total = 0.0
    for iu, iT, u, T in grid.points():
        config = base.with_params(u=u, T=T)
        total += grid.reps * expected_steps(config)
        key = (_rng.SWEEP, iu, iT)
        for a in range(0, grid.reps, chunk):
            jobs.append((config, key, range(a, min(a + chunk, grid.reps))))
    if total > step_budget:
        raise ResourceError(f"sweep would take ~{total:.3g} walk steps (budget {step_budget:.3g})")
    rows = pmap(_sweep_job, jobs, workers)
    per_point: dict = {}
    for (config, _, _), part in zip(jobs, rows):
        per_point.setdefault((config.u, config.T), []).extend(part)
    out = []
    for _, _, u, T in grid.points():
        obs = np.array(per_point[(u, T)], dtype=float)
        ls, ls_se = _mean_se(obs[:, 0])
        ld, ld_se = _mean_se(obs[:, 1])
        ss, ss_se = _mean_se(obs[:, 2])
        sd, _ = _mean_se(obs[:, 3])
        out.append(PhasePoint(u, T, grid.reps, ls, ld, ss, sd, ls_se, ld_se, ss_se))
    return out


# ---------------------------------------------------------------- hill climbing


@dataclass(frozen=True)
class ClimbConfig:
    N: int = 50
    u0: float = 3.0
    T0: float = 0.01
    dT: float = 0.01
    du: float = 0.01
    eps: float = 0.2
    T_max: float = 20.0
    reps_per_step: int = 1
    d: int = 3

    def __post_init__(self):
        problems = []
        for name in ("N", "u0", "T0", "dT", "du", "eps", "T_max", "reps_per_step"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be positive")
        if not self.eps <= 1 / math.sqrt(3) + 1e-12:
            problems.append("eps must not exceed 1/sqrt(3)")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def threshold(self) -> float:
        return math.sqrt(3) * self.eps * self.N

    @property
    def max_steps(self) -> int:
        return math.ceil(self.u0 / self.du) + math.ceil((self.T_max - self.T0) / self.dT) + 2


@dataclass(frozen=True)
class ClimbStep:
    n: int
    u: float
    T: float
    diameter: float
    decision: str  # "T-up" or "u-down"

    @property
    def marked(self) -> bool:
        return self.decision == "u-down"


@dataclass
class ClimbPath:
    config: ClimbConfig
    steps: list = field(default_factory=list)
    truncated: bool = False

    @property
    def marked(self) -> list[tuple[float, float]]:
        return [(s.u, s.T) for s in self.steps if s.marked]

    def check_staircase(self) -> None:
        c = self.config
        for a, b in zip(self.steps, self.steps[1:]):
            up = math.isclose(b.T - a.T, c.dT, rel_tol=1e-9, abs_tol=1e-12) and b.u == a.u
            down = math.isclose(a.u - b.u, c.du, rel_tol=1e-9, abs_tol=1e-12) and b.T == a.T
            if not (up or down):
                raise AssertionError(f"steps {a.n} -> {b.n} are not a staircase move")
            if up != (a.decision == "T-up"):
                raise AssertionError(f"step {a.n} moved against its decision")


DiameterOracle = Callable[[float, float, int], float]


def fri_diameter_oracle(climb: ClimbConfig, template: FriConfig, seed: int) -> DiameterOracle:
    """Largest-cluster bbox diameter of fresh samples, averaged over ``reps_per_step``."""
    box = Box.cube(climb.d, climb.N)
    base = template.with_params(d=climb.d, box=box, master_seed=seed)

    def oracle(u: float, T: float, n: int) -> float:
        if u <= 0:
            return 0.0  # empty configuration
        config = base.with_params(u=u, T=T)
        stream = _rng.RngStream(seed, (_rng.CLIMB, n, 0))
        vals = []
        for r in range(climb.reps_per_step):
            rep = cluster_report(sample_fri(config, stream.state(r)).edges)
            vals.append(rep.largest.bbox_diameter if rep.largest is not None else 0.0)
        return float(np.mean(vals))

    return oracle


def hill_climb(climb: ClimbConfig, template: FriConfig, rng: Optional[_rng.RngStream] = None,
               oracle: Optional[DiameterOracle] = None,
               progress: Optional[Callable[[ClimbStep], None]] = None) -> ClimbPath:
    """Staircase search: raise T while the largest cluster is small, else lower u.

    Step ``n`` samples from the stream keyed ``(CLIMB, n, 0)``.  The loop ends
    once ``u < 0`` or, as a flagged truncation, once ``T > T_max``.
    """
    seed = rng.master_seed if rng is not None else template.master_seed
    if oracle is None:
        oracle = fri_diameter_oracle(climb, template, seed)
    path = ClimbPath(climb)
    iu = iT = 0
    tol = 1e-9
    for n in range(climb.max_steps + 1):
        u = round(climb.u0 - iu * climb.du, 12)
        T = round(climb.T0 + iT * climb.dT, 12)
        dn = float(oracle(max(u, 0.0), T, n))
        if dn < climb.threshold:
            decision = "T-up"
            iT += 1
        else:
            decision = "u-down"
            iu += 1
        step = ClimbStep(n, u, T, dn, decision)
        path.steps.append(step)
        if progress is not None:
            progress(step)
        if climb.u0 - iu * climb.du < -tol * climb.du:
            return path
        if climb.T0 + iT * climb.dT > climb.T_max + tol * climb.dT:
            path.truncated = True
            return path
    raise AssertionError("hill climb exceeded its step bound")


# ---------------------------------------------------------------- regression


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r2: float
    n_points: int
    slope_stderr: float = 0.0


def fit_loglog(points: Sequence[tuple[float, float]]) -> RegressionResult:
    """Least squares of log T on log u."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("need at least two points")
    if np.any(pts <= 0):
        raise ValueError("coordinates must be positive")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(x) == 0:
        raise ValueError("u values must not all coincide")
    fit = _stats.linregress(x, y)
    r2 = fit.rvalue ** 2 if np.ptp(y) > 0 else 1.0
    return RegressionResult(float(fit.slope), float(fit.intercept), float(r2), len(pts),
                            float(fit.stderr))
