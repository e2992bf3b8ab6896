"""CSV tables, run manifests and small hand-written SVG plots."""
from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

SCHEMAS = {
    "sweep.csv": ("u", "T", "reps", "mean_largest_size", "mean_largest_diam",
                  "mean_second_size", "mean_second_diam"),
    "climb.csv": ("step", "u", "T", "diameter", "decision", "marked"),
    "edge_density.csv": ("d", "u", "T", "method", "estimate", "stderr", "n_samples"),
    "clusters.csv": ("u", "T", "rep", "component_count", "largest_size", "largest_edges",
                     "largest_diam", "second_size", "second_edges", "second_diam"),
    "sample.csv": ("u", "T", "rep", "fibers", "occupied_edges", "occupied_fraction"),
    "capacity.csv": ("d", "T", "N", "estimate", "stderr", "n_samples"),
}


def fmt(x) -> str:
    """Locale-independent text: shortest round-trip decimal for floats."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return repr(x)
    return str(x)


def atomic_write(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, schema has {len(columns)}")
        lines.append(",".join(fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def write_csv(out_dir: Path, name: str, rows: Iterable[Sequence]) -> Path:
    path = Path(out_dir) / name
    atomic_write(path, csv_text(SCHEMAS[name], rows).encode())
    return path


def read_csv(path: Path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir: Path, config: dict, version: str, wall_time: float,
                   outputs: Sequence[Path], notes: Sequence[str], status: int,
                   summary: Optional[dict] = None) -> Path:
    manifest = {
        "version": version,
        "config": config,
        "wall_time_s": round(wall_time, 3),
        "outputs": {Path(p).name: sha256(p) for p in sorted(outputs)},
        "notes": list(notes),
        "status": status,
        "summary": summary or {},
    }
    path = Path(out_dir) / "manifest.json"
    atomic_write(path, (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    return path


# ---------------------------------------------------------------- SVG

_W, _H, _PAD = 480, 360, 50


def _scale(vals, lo_px, hi_px, log=False):
    v = np.log(vals) if log else np.asarray(vals, dtype=float)
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi == lo:
        hi = lo + 1.0
    return lo_px + (v - lo) / (hi - lo) * (hi_px - lo_px), (lo, hi)


def _axes(xlabel, ylabel, xr, yr, title):
    x0, x1, y0, y1 = _PAD, _W - 20, _H - _PAD, 20
    out = [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2}" y="{_H - 12}" text-anchor="middle" font-size="13">{xlabel}</text>',
        f'<text x="14" y="{(y0 + y1) / 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 14 {(y0 + y1) / 2})">{ylabel}</text>',
        f'<text x="{x0}" y="{y0 + 16}" font-size="10">{xr[0]:.3g}</text>',
        f'<text x="{x1}" y="{y0 + 16}" font-size="10" text-anchor="end">{xr[1]:.3g}</text>',
        f'<text x="{x0 - 4}" y="{y0}" font-size="10" text-anchor="end">{yr[0]:.3g}</text>',
        f'<text x="{x0 - 4}" y="{y1 + 8}" font-size="10" text-anchor="end">{yr[1]:.3g}</text>',
    ]
    if title:
        out.append(f'<text x="{_W / 2}" y="14" text-anchor="middle" font-size="13">{title}</text>')
    return out


def _doc(body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}">\n<rect width="100%" height="100%" fill="white"/>\n'
            + "\n".join(body) + "\n</svg>\n")


def scatter_svg(x, y, marked=None, xlabel="u", ylabel="T", title="", log=False,
                line=None) -> str:
    """Path as small dots, marked points as open circles; ``line`` = (slope, intercept)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    px, xr = _scale(x, _PAD, _W - 20, log)
    py, yr = _scale(y, _H - _PAD, 20, log)
    if log:
        xr = tuple(math.exp(t) for t in xr)
        yr = tuple(math.exp(t) for t in yr)
    body = _axes(("log " if log else "") + xlabel, ("log " if log else "") + ylabel, xr, yr, title)
    marked = np.zeros(len(x), bool) if marked is None else np.asarray(marked, bool)
    for a, b, m in zip(px, py, marked):
        if m:
            body.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="none" stroke="crimson"/>')
        else:
            body.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="1" fill="steelblue"/>')
    if line is not None and log:
        lx = np.log([xr[0], xr[1]])
        ly = line[0] * lx + line[1]
        lo, hi = math.log(yr[0]), math.log(yr[1])
        span = hi - lo or 1.0
        sx = [_PAD, _W - 20]
        sy = [_H - _PAD + (v - lo) / span * (20 - (_H - _PAD)) for v in ly]
        body.append(f'<line x1="{sx[0]}" y1="{sy[0]:.2f}" x2="{sx[1]}" y2="{sy[1]:.2f}" '
                    f'stroke="black" stroke-dasharray="4 3"/>')
    return _doc(body)


def heatmap_svg(u_values, T_values, grid, title="", label="") -> str:
    """Cells coloured by ``grid[iu][iT]`` on a white-to-blue scale; u across, T up."""
    g = np.asarray(grid, dtype=float)
    nu, nT = g.shape
    lo, hi = float(np.nanmin(g)), float(np.nanmax(g))
    span = hi - lo or 1.0
    cw = (_W - 20 - _PAD) / nu
    ch = (_H - _PAD - 20) / nT
    body = _axes("u", "T", (min(u_values), max(u_values)), (min(T_values), max(T_values)),
                 title or label)
    for i in range(nu):
        for j in range(nT):
            t = (g[i, j] - lo) / span
            r = int(255 * (1 - t))
            gg = int(255 * (1 - 0.6 * t))
            body.append(f'<rect x="{_PAD + i * cw:.2f}" y="{_H - _PAD - (j + 1) * ch:.2f}" '
                        f'width="{cw + 0.3:.2f}" height="{ch + 0.3:.2f}" fill="rgb({r},{gg},255)"/>')
    return _doc(body)


def write_svg(out_dir: Path, name: str, text: str) -> Path:
    path = Path(out_dir) / name
    atomic_write(path, text.encode())
    return path
