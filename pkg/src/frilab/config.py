"""Run configuration: a line-oriented ``key = value`` file plus overrides.

Every field of :class:`RunConfig` is a valid key.  ``u`` and ``T`` accept
comma-separated lists; ``#`` starts a comment.  Validation reports every
violated constraint at once.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .parallel import default_workers
from .sampler import MODES

COMMANDS = ("sample", "clusters", "edge-density", "sweep", "climb", "capacity")
METHODS = ("closed", "direct", "both")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class RunConfig:
    command: str = "sample"
    d: int = 3
    u: tuple = ()
    T: tuple = ()
    N: int = 50
    seed: int = 0
    workers: int = field(default_factory=default_workers)
    reps: int = 1
    out: str = "out"
    mode: str = "exact"
    padding_tol: float = 1e-3
    # edge-density and capacity
    method: str = "both"
    n_walks: int = 100_000
    # sweep grid
    u_min: float = 0.1
    u_max: float = 3.0
    u_step: float = 0.1
    T_min: float = 0.1
    T_max: float = 6.0
    T_step: float = 0.1
    # hill climb
    u0: float = 3.0
    T0: float = 0.01
    du: float = 0.01
    dT: float = 0.01
    eps: float = 0.2
    T_cap: float = 20.0
    reps_per_step: int = 1
    svg: bool = True


_FIELDS = {f.name: f for f in fields(RunConfig)}
_KINDS = {name: type(getattr(RunConfig(workers=1), name)) for name in _FIELDS}
_TUPLES = {"u", "T"}


def _convert(name: str, raw: str):
    kind = _KINDS[name]
    raw = raw.strip()
    if name in _TUPLES:
        return tuple(float(x) for x in raw.split(",") if x.strip())
    if kind is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def parse_lines(lines: Iterable[str], where: str = "<config>") -> tuple[dict, list[str]]:
    values: dict = {}
    problems = []
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{where}:{lineno}: expected key=value, got {line!r}")
            continue
        key, raw = (s.strip() for s in line.split("=", 1))
        _assign(values, problems, key, raw, f"{where}:{lineno}: ")
    return values, problems


def _assign(values: dict, problems: list, key: str, raw, prefix: str = "") -> None:
    if key not in _FIELDS:
        problems.append(f"{prefix}unknown key {key!r}")
        return
    try:
        values[key] = _convert(key, raw) if isinstance(raw, str) else raw
    except ValueError:
        problems.append(f"{prefix}{key}: cannot parse {raw!r}")


def validate(cfg: RunConfig) -> list[str]:
    p = []
    if cfg.command not in COMMANDS:
        p.append(f"command must be one of {', '.join(COMMANDS)}")
    if cfg.d < 1:
        p.append("d must be positive")
    if cfg.command == "edge-density" and cfg.d < 2:
        p.append("edge-density needs d >= 2")
    for name in ("u", "T"):
        vals = getattr(cfg, name)
        if any(not (v > 0) for v in vals):
            p.append(f"{name} must be positive")
        if any(not math.isfinite(v) for v in vals):
            p.append(f"{name} must be finite")
    needs = {"sample": ("u", "T"), "clusters": ("u", "T"), "edge-density": ("u", "T"),
             "capacity": ("T",)}
    for name in needs.get(cfg.command, ()):
        if not getattr(cfg, name):
            p.append(f"{name} is required for {cfg.command}")
    for name in ("N", "reps", "workers", "n_walks", "reps_per_step"):
        if getattr(cfg, name) < 1:
            p.append(f"{name} must be >= 1")
    if not 0 <= cfg.seed < 2 ** 64:
        p.append("seed must lie in [0, 2**64)")
    if cfg.mode not in MODES:
        p.append(f"mode must be one of {', '.join(MODES)}")
    if cfg.method not in METHODS:
        p.append(f"method must be one of {', '.join(METHODS)}")
    if not 0 < cfg.padding_tol < 1:
        p.append("padding_tol must lie in (0, 1)")
    for name in ("u_min", "u_step", "T_min", "T_step", "u0", "T0", "du", "dT", "T_cap"):
        if not getattr(cfg, name) > 0:
            p.append(f"{name} must be positive")
    if cfg.u_max < cfg.u_min:
        p.append("u_max must be >= u_min")
    if cfg.T_max < cfg.T_min:
        p.append("T_max must be >= T_min")
    if not 0 < cfg.eps <= 1 / math.sqrt(3) + 1e-12:
        p.append("eps must lie in (0, 1/sqrt(3)]")
    return p


def parse_config(path: Optional[Union[str, Path]] = None,
                 overrides: Optional[Mapping[str, object]] = None,
                 text: Optional[str] = None) -> RunConfig:
    """Read ``path`` (or ``text``), apply ``overrides`` and validate.

    Override values may be strings (parsed like file values) or typed values;
    ``None`` entries are ignored.  Raises :class:`ConfigError` listing every problem.
    """
    values: dict = {}
    problems: list = []
    if path is not None:
        values, problems = parse_lines(Path(path).read_text().splitlines(), str(path))
    elif text is not None:
        values, problems = parse_lines(text.splitlines())
    for key, raw in (overrides or {}).items():
        if raw is not None:
            _assign(values, problems, key, raw, "override: ")
    cfg = RunConfig(**values)
    problems += validate(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_config(cfg: RunConfig) -> str:
    return "".join(f"{f.name} = {_fmt(getattr(cfg, f.name))}\n" for f in fields(cfg))


def as_dict(cfg: RunConfig) -> dict:
    d = dataclasses.asdict(cfg)
    for k in _TUPLES:
        d[k] = list(d[k])
    return d
