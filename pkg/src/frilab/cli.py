"""Command-line entry point: ``frilab --command sweep --N 30 --out runs/sweep``."""
from __future__ import annotations

import argparse
import itertools
import sys
import time
from pathlib import Path
from typing import Optional

from . import __version__
from . import io as _io
from . import rng as _rng
from .clusters import cluster_report
from .config import COMMANDS, ConfigError, RunConfig, as_dict, parse_config
from .edge_density import closed_form, edge_density_direct, estimate_inputs
from .lattice import Box
from .phase import ClimbConfig, SweepGrid, fit_loglog, hill_climb, sweep
from .sampler import FriConfig, ResourceError, run_replicates
from .walks import KilledWalkParams, estimate_capacity

EXIT_OK, EXIT_CONFIG, EXIT_TRUNCATED, EXIT_RESOURCE = 0, 2, 3, 4


def _template(cfg: RunConfig, u: float = 1.0, T: float = 1.0) -> FriConfig:
    return FriConfig(cfg.d, u, T, Box.cube(cfg.d, cfg.N), mode=cfg.mode,
                     padding_tol=cfg.padding_tol, master_seed=cfg.seed)


def _points(cfg: RunConfig):
    return itertools.product(enumerate(cfg.u), enumerate(cfg.T))


def _sample_row(sample) -> tuple:
    box = sample.edges.box
    occ = len(sample.edges)
    return sample.fiber_count, occ, occ / box.n_edges()


def _cluster_row(sample) -> tuple:
    rep = cluster_report(sample.edges)
    out = [rep.component_count]
    for c in (rep.largest, rep.second):
        out += [0, 0, 0.0] if c is None else [c.size_vertices, c.size_edges, c.bbox_diameter]
    return tuple(out)


def _run_sample(cfg, out, reducer, name):
    rows = []
    for (iu, u), (iT, T) in _points(cfg):
        res = run_replicates(_template(cfg, u, T), cfg.reps, reducer, workers=cfg.workers,
                             key=(_rng.FRI, iu, iT))
        rows += [(u, T, r, *vals) for r, vals in enumerate(res)]
    return [_io.write_csv(out, name, rows)], [], {}


def _run_edge_density(cfg, out):
    rows = []
    inputs = {}
    for (iu, u), (iT, T) in _points(cfg):
        if cfg.method in ("closed", "both"):
            if iT not in inputs:
                stream = _rng.RngStream(cfg.seed, (_rng.EDGE_INPUTS, iT, 0))
                inputs[iT] = estimate_inputs(stream, cfg.d, T, cfg.n_walks, workers=cfg.workers)
            cf = closed_form(inputs[iT], cfg.d, u, T)
            rows.append((cfg.d, u, T, "closed", cf.p, cf.p_stderr, cfg.n_walks))
        if cfg.method in ("direct", "both"):
            stream = _rng.RngStream(cfg.seed, (_rng.EDGE_DIRECT, iu, iT))
            est = edge_density_direct(stream, cfg.d, u, T, cfg.reps, workers=cfg.workers)
            rows.append((cfg.d, u, T, "direct", est.value, est.stderr, est.n_samples))
    return [_io.write_csv(out, "edge_density.csv", rows)], [], {}


def _run_sweep(cfg, out):
    grid = SweepGrid.from_ranges((cfg.u_min, cfg.u_max), cfg.u_step, (cfg.T_min, cfg.T_max),
                                 cfg.T_step, cfg.N, cfg.reps, cfg.d)
    pts = sweep(grid, _template(cfg), _rng.RngStream(cfg.seed, (_rng.SWEEP, 0, 0)),
                workers=cfg.workers)
    rows = [(p.u, p.T, p.reps, p.mean_largest_size, p.mean_largest_diam, p.mean_second_size,
             p.mean_second_diam) for p in pts]
    paths = [_io.write_csv(out, "sweep.csv", rows)]
    if cfg.svg:
        nu, nT = len(grid.u_values), len(grid.T_values)
        for attr, name in (("mean_largest_diam", "sweep_largest_diam.svg"),
                           ("mean_second_size", "sweep_second_size.svg")):
            vals = [[getattr(pts[i * nT + j], attr) for j in range(nT)] for i in range(nu)]
            paths.append(_io.write_svg(out, name, _io.heatmap_svg(
                grid.u_values, grid.T_values, vals, title=attr.replace("_", " "))))
    return paths, [], {}


def _run_climb(cfg, out):
    climb = ClimbConfig(cfg.N, cfg.u0, cfg.T0, cfg.dT, cfg.du, cfg.eps, cfg.T_cap,
                        cfg.reps_per_step, cfg.d)
    path = hill_climb(climb, _template(cfg), _rng.RngStream(cfg.seed, (_rng.CLIMB, 0, 0)))
    path.check_staircase()
    rows = [(s.n, s.u, s.T, s.diameter, s.decision, s.marked) for s in path.steps]
    paths = [_io.write_csv(out, "climb.csv", rows)]
    notes, summary = [], {"steps": len(path.steps), "marked": len(path.marked)}
    if path.truncated:
        notes.append(f"truncated: T exceeded T_cap = {cfg.T_cap} before u dropped below 0")
    fit = None
    if len(path.marked) >= 2 and len({u for u, _ in path.marked}) >= 2:
        fit = fit_loglog(path.marked)
        summary.update(slope=fit.slope, intercept=fit.intercept, r2=fit.r2)
    if cfg.svg:
        xs = [s.u for s in path.steps]
        ys = [s.T for s in path.steps]
        paths.append(_io.write_svg(out, "climb.svg", _io.scatter_svg(
            xs, ys, [s.marked for s in path.steps], title=f"hill climb, N={cfg.N}, eps={cfg.eps}")))
        if fit is not None:
            mu, mT = zip(*path.marked)
            paths.append(_io.write_svg(out, "climb_loglog.svg", _io.scatter_svg(
                mu, mT, [True] * len(mu), log=True, line=(fit.slope, fit.intercept),
                title=f"slope {fit.slope:.3f}")))
    return paths, notes, summary


def _run_capacity(cfg, out):
    rows = []
    box = Box.cube(cfg.d, cfg.N)
    for iT, T in enumerate(cfg.T):
        stream = _rng.RngStream(cfg.seed, (_rng.CAPACITY, iT, 0))
        est = estimate_capacity(stream, box, KilledWalkParams(cfg.d, T), cfg.n_walks,
                                workers=cfg.workers)
        rows.append((cfg.d, T, cfg.N, est.value, est.stderr, est.n_samples))
    return [_io.write_csv(out, "capacity.csv", rows)], [], {}


def execute(cfg: RunConfig) -> int:
    """Run ``cfg`` and write its outputs plus ``manifest.json``; returns the exit status."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.time()
    runners = {
        "sample": lambda: _run_sample(cfg, out, _sample_row, "sample.csv"),
        "clusters": lambda: _run_sample(cfg, out, _cluster_row, "clusters.csv"),
        "edge-density": lambda: _run_edge_density(cfg, out),
        "sweep": lambda: _run_sweep(cfg, out),
        "climb": lambda: _run_climb(cfg, out),
        "capacity": lambda: _run_capacity(cfg, out),
    }
    status = EXIT_OK
    try:
        paths, notes, summary = runners[cfg.command]()
    except ResourceError as exc:
        paths, notes, summary = [], [f"resource guard: {exc}"], {}
        status = EXIT_RESOURCE
    if any(n.startswith("truncated") for n in notes):
        status = EXIT_TRUNCATED
    _io.write_manifest(out, as_dict(cfg), __version__, time.time() - start, paths, notes, status,
                       summary)
    for n in notes:
        print(n, file=sys.stderr)
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="frilab", description="Finitary random interlacements toolkit.")
    ap.add_argument("--config", help="key=value configuration file")
    ap.add_argument("--command", choices=COMMANDS)
    ap.add_argument("--d", help="dimension")
    ap.add_argument("--u", help="intensity, or a comma-separated list")
    ap.add_argument("--T", help="mean fiber length, or a comma-separated list")
    ap.add_argument("--N", help="box side: the box is [0, N]^d")
    ap.add_argument("--seed", help="master seed")
    ap.add_argument("--workers", help="worker processes (results do not depend on it)")
    ap.add_argument("--reps", help="replicates per parameter point")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="any other configuration key; repeatable")
    return ap


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in
                 ("command", "d", "u", "T", "N", "seed", "workers", "reps", "out")}
    problems = []
    for item in args.set:
        if "=" not in item:
            problems.append(f"--set expects KEY=VALUE, got {item!r}")
            continue
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    try:
        if problems:
            raise ConfigError(problems)
        cfg = parse_config(args.config, overrides)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
