import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from frilab import io as fio
from frilab.cli import EXIT_CONFIG, EXIT_OK, EXIT_TRUNCATED, execute, main
from frilab.config import ConfigError, RunConfig, emit_config, parse_config

MINIMAL = "command = sample\nd = 3\nu = 0.1667\nT = 2.2\nN = 50\nseed = 1\n"


def test_minimal_file_is_valid(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# a sample run\n" + MINIMAL)
    cfg = parse_config(path, {"workers": 1})
    assert cfg.command == "sample" and cfg.d == 3 and cfg.N == 50 and cfg.seed == 1
    assert cfg.u == (0.1667,) and cfg.T == (2.2,)


def test_T_zero_rejected():
    with pytest.raises(ConfigError) as exc:
        parse_config(text=MINIMAL.replace("T = 2.2", "T = 0"))
    assert "T must be positive" in exc.value.problems


def test_flag_overrides_file():
    cfg = parse_config(text=MINIMAL, overrides={"seed": "9", "workers": 1})
    assert cfg.seed == 9


def test_every_problem_is_listed():
    text = MINIMAL + "colour = blue\nreps = 0\nmode = sideways\nnonsense line\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text=text.replace("u = 0.1667", "u = -1"), overrides={"bogus": "1"})
    probs = "\n".join(exc.value.problems)
    for frag in ("unknown key 'colour'", "unknown key 'bogus'", "reps must be >= 1",
                 "mode must be one of", "expected key=value", "u must be positive"):
        assert frag in probs
    assert len(exc.value.problems) >= 6


def test_unparseable_value():
    with pytest.raises(ConfigError) as exc:
        parse_config(text=MINIMAL.replace("N = 50", "N = fifty"))
    assert any("N: cannot parse" in p for p in exc.value.problems)


finite = st.floats(0.01, 50, allow_nan=False)


@given(st.sampled_from(["sample", "clusters", "edge-density", "capacity"]),
       st.lists(finite, min_size=1, max_size=4), st.lists(finite, min_size=1, max_size=4),
       st.integers(1, 80), st.integers(0, 2 ** 64 - 1), st.booleans(), st.floats(1e-6, 0.9))
def test_emit_parse_round_trip(command, us, Ts, N, seed, svg, tol):
    cfg = RunConfig(command=command, u=tuple(us), T=tuple(Ts), N=N, seed=seed, svg=svg,
                    padding_tol=tol, workers=1)
    assert parse_config(text=emit_config(cfg)) == cfg


def test_fmt_is_round_trip():
    for x in (0.1, 1 / 3, 2.2, 1e-300, 12345678.9):
        assert float(fio.fmt(x)) == x
    assert fio.fmt(True) == "1" and fio.fmt(7) == "7" and fio.fmt(math.nan) == "nan"


def test_csv_rejects_wrong_width(tmp_path):
    with pytest.raises(ValueError):
        fio.write_csv(tmp_path, "sweep.csv", [(1, 2)])


def run(tmp_path, name, **kw):
    kw.setdefault("workers", 1)
    out = tmp_path / name
    cfg = parse_config(overrides={**kw, "out": str(out)})
    return execute(cfg), out


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_sample_runs_are_reproducible(tmp_path):
    args = dict(command="sample", u="0.2,0.4", T="1.5", N=8, reps=3, seed=4)
    s1, a = run(tmp_path, "a", **args)
    s2, b = run(tmp_path, "b", **args)
    s3, c = run(tmp_path, "c", workers=2, **args)
    assert s1 == s2 == s3 == EXIT_OK
    assert manifest(a)["outputs"] == manifest(b)["outputs"] == manifest(c)["outputs"]
    rows = fio.read_csv(a / "sample.csv")
    assert len(rows) == 6 and list(rows[0]) == list(fio.SCHEMAS["sample.csv"])


def test_clusters_command(tmp_path):
    status, out = run(tmp_path, "cl", command="clusters", u="0.3", T="2", N=10, reps=2)
    assert status == EXIT_OK
    rows = fio.read_csv(out / "clusters.csv")
    assert len(rows) == 2
    assert int(rows[0]["largest_size"]) >= int(rows[0]["second_size"])


def test_edge_density_both_gives_two_rows(tmp_path):
    status, out = run(tmp_path, "ed", command="edge-density", u="0.1667", T="2", reps=2000,
                      n_walks=5000)
    assert status == EXIT_OK
    rows = fio.read_csv(out / "edge_density.csv")
    assert [r["method"] for r in rows] == ["closed", "direct"]
    assert all(r["d"] == "3" and r["T"] == "2.0" for r in rows)


def test_capacity_command(tmp_path):
    status, out = run(tmp_path, "cap", command="capacity", T="1", N=2, n_walks=200)
    assert status == EXIT_OK
    [row] = fio.read_csv(out / "capacity.csv")
    assert float(row["estimate"]) > 0


def test_sweep_command_writes_heatmaps(tmp_path):
    status, out = run(tmp_path, "sw", command="sweep", N=6, reps=2, u_min=0.2, u_max=0.4,
                      u_step=0.2, T_min=1, T_max=2, T_step=1)
    assert status == EXIT_OK
    assert len(fio.read_csv(out / "sweep.csv")) == 4
    assert (out / "sweep_largest_diam.svg").read_text().startswith("<svg")


def test_climb_truncation_sets_exit_status(tmp_path):
    status, out = run(tmp_path, "climb", command="climb", N=8, u0=0.6, du=0.2, T0=0.2, dT=0.4,
                      T_cap=3.0, eps=0.3)
    assert status == EXIT_TRUNCATED
    m = manifest(out)
    assert m["status"] == EXIT_TRUNCATED
    assert any(n.startswith("truncated") for n in m["notes"])
    assert "climb.csv" in m["outputs"] and "climb.svg" in m["outputs"]
    rows = fio.read_csv(out / "climb.csv")
    assert rows[0]["step"] == "0" and rows[0]["decision"] in ("T-up", "u-down")


def test_main_flags_and_bad_config(tmp_path, capsys):
    out = tmp_path / "m"
    status = main(["--command", "sample", "--u", "0.3", "--T", "1", "--N", "5", "--seed", "2",
                   "--workers", "1", "--out", str(out), "--set", "mode=padded"])
    assert status == EXIT_OK
    assert manifest(out)["config"]["mode"] == "padded"
    assert main(["--command", "sample", "--u", "0.3", "--T", "0", "--out", str(out)]) == EXIT_CONFIG
    assert "T must be positive" in capsys.readouterr().err
    assert main(["--command", "sample", "--set", "oops"]) == EXIT_CONFIG
