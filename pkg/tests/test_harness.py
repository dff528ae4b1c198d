import csv
import math

import pytest
from hypothesis import given, settings, strategies as st

from kslog import config as config_mod
from kslog.cli import main
from kslog.diagnostics import read_csv

STEADY = """\
# u = 1 and v = sat(1) = 8/9 is a constant steady state at k = 8
model.chi = 1.0
model.a = 1.0
model.b = 1.0
model.k = 8.0
grid.extents = 2.0
grid.cells = 16
init.u.profile = constant
init.u.value = 1.0
init.v.profile = constant
init.v.value = {v}
solver.scheme = imex
solver.t_end = {t_end}
solver.dt_max = 0.01
"""

BUMP = """\
model.chi = {chi}
model.a = 1.0
model.b = {b}
model.n = {n}
grid.extents = 4.0
grid.cells = 32
init.u.profile = gaussian-bump
init.u.amplitude = 1.5
init.u.width = 0.4
init.v.profile = constant
solver.scheme = imex
solver.t_end = 0.3
solver.dt_max = 0.005
sweep.axis = {axis}
sweep.values = {values}
"""


def _write(tmp_path, text, name="cfg.txt"):
    path = tmp_path / name
    path.write_text(text)
    return path


def _steady(tmp_path, t_end=0.5):
    return _write(tmp_path, STEADY.format(v=repr(8.0 / 9.0), t_end=t_end))


def test_admissible_cli(capsys):
    assert main(["admissible", "--chi", "1", "--a", "1", "--b", "1"]) == 0
    out = capsys.readouterr().out
    assert "admissible = true" in out
    b_plus = float(out.split("b_plus = ")[1].split()[0])
    assert b_plus == pytest.approx(0.4142136, abs=1e-7)
    assert "threshold_n3 = 2.8284271247461903" in out
    assert main(["admissible", "--chi", "3", "--a", "1", "--b", "0.1"]) == 0
    assert "admissible = false" in capsys.readouterr().out


def test_admissible_cli_domain_error():
    assert main(["admissible", "--chi", "1", "--a", "0"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["admissible", "--chi", "x", "--a", "1"])
    assert exc.value.code == 2


def test_run_steady_state(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(_steady(tmp_path)), "--out", str(out)]) == 0
    summary = dict(line.split(" = ") for line in capsys.readouterr().out.splitlines())
    with open(out / "verification.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and all(r["pass"] == "1" for r in rows)
    recs = read_csv(out / "diagnostics.csv")
    # the defect density 1/(8+1) is constant in time
    assert float(summary["defect_integral"]) == pytest.approx(0.5 * 2.0 / 9.0, rel=1e-12)
    # summary numbers are the CSV numbers verbatim
    with open(out / "diagnostics.csv") as fh:
        last = list(csv.DictReader(fh))[-1]
    assert summary["final_mass_u"] == last["mass_u"] and summary["final_mass_v"] == last["mass_v"]
    assert len(recs) == 51
    assert len(list((out / "snapshots").glob("u_*.kslg"))) == 51


def test_run_t_end_zero_one_record(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(_steady(tmp_path, t_end=0.0)), "--out", str(out)]) == 0
    assert len(read_csv(out / "diagnostics.csv")) == 1


def test_rerun_identical_bytes(tmp_path):
    cfg = _steady(tmp_path, t_end=0.1)
    out = tmp_path / "out"
    main(["run", str(cfg), "--out", str(out)])
    first = {p.relative_to(out): p.read_bytes() for p in out.rglob("*") if p.is_file()}
    main(["run", str(cfg), "--out", str(out)])
    second = {p.relative_to(out): p.read_bytes() for p in out.rglob("*") if p.is_file()}
    assert first == second


def test_verify_subcommand(tmp_path):
    out = tmp_path / "out"
    main(["run", str(_steady(tmp_path, t_end=0.2)), "--out", str(out)])
    before = (out / "verification.csv").read_bytes()
    assert main(["verify", str(out)]) == 0
    assert (out / "verification.csv").read_bytes() == before


def test_run_refuses_inadmissible(tmp_path):
    cfg = _write(tmp_path, BUMP.format(chi=3.0, b=0.1, n=1, axis="k", values=""))
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert main(["run", str(cfg), "--out", str(tmp_path / "o"), "--force"]) in (0, 1, 4)


ABORT = """\
model.chi = 20.0
model.a = 1.0
model.b = 30.0
model.k = 10000.0
grid.extents = 4.0
grid.cells = 16
init.u.profile = checkerboard-positive
init.u.base = 0.001
init.u.amplitude = 10.0
init.u.block = 1
init.v.profile = gaussian-bump
init.v.amplitude = 100.0
init.v.width = 0.2
solver.scheme = explicit
solver.flux = central
solver.cfl_safety = 1.0
solver.t_end = 0.5
solver.dt_max = 1.0
"""


def test_run_solver_abort_exit_code(tmp_path, capsys):
    # central fluxes at large cell Peclet number lose positivity; the run aborts
    code = main(["run", str(_write(tmp_path, ABORT)), "--out", str(tmp_path / "o")])
    assert code == 4
    assert "aborted at t = " in capsys.readouterr().err


def test_bad_config_usage_error(tmp_path):
    assert main(["run", str(_write(tmp_path, "model.chi = 1\n"))]) == 2
    assert main(["run", str(_write(tmp_path, "nonsense line\n"))]) == 2
    assert main(["run", str(tmp_path / "missing.txt")]) == 2


def test_k_sweep_strictly_decreasing_defect(tmp_path):
    cfg = _write(tmp_path, BUMP.format(chi=1.0, b=1.0, n=1, axis="k", values="2, 4, 8, 16, 32"))
    out = tmp_path / "sw"
    assert main(["sweep", str(cfg), "--out", str(out), "--workers", "2"]) == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["param", "defect_integral", "final_mass_u", "final_energy",
                             "gronwall_slack", "aborted"]
    d = [float(r["defect_integral"]) for r in rows]
    assert all(x > y for x, y in zip(d, d[1:]))
    assert all(r["aborted"] == "0" for r in rows)


def test_chi_sweep_labels(tmp_path):
    cfg = _write(tmp_path, BUMP.format(chi=1.0, b=20.0, n=3, axis="chi", values="1, 2.8, 2.9, 4"))
    out = tmp_path / "sw"
    assert main(["sweep", str(cfg), "--out", str(out), "--workers", "1"]) == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["threshold_regime"] for r in rows] == ["below", "below", "above", "above"]
    assert math.sqrt(8) == pytest.approx(2.8284, abs=1e-4)


def test_sweep_aborted_member_and_empty(tmp_path):
    cfg = _write(tmp_path, BUMP.format(chi=3.0, b=0.2, n=1, axis="chi", values="0.5, 3"))
    out = tmp_path / "sw"
    assert main(["sweep", str(cfg), "--out", str(out), "--workers", "1"]) == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["aborted"] for r in rows] == ["0", "1"]
    cfg = _write(tmp_path, BUMP.format(chi=1.0, b=1.0, n=1, axis="k", values=""), "empty.txt")
    assert main(["sweep", str(cfg), "--out", str(tmp_path / "e")]) == 0
    assert (tmp_path / "e" / "sweep.csv").read_text() == (
        "param,defect_integral,final_mass_u,final_energy,gronwall_slack,aborted\n")


def test_threads_env_caps_workers(monkeypatch):
    from kslog.harness import worker_count
    monkeypatch.setenv("KSLG_THREADS", "3")
    assert worker_count() == 3


def test_snapshot_initial_data(tmp_path):
    out = tmp_path / "out"
    main(["run", str(_steady(tmp_path, t_end=0.1)), "--out", str(out)])
    text = STEADY.format(v="0.9", t_end=0.1).replace(
        "init.u.profile = constant\ninit.u.value = 1.0", "init.u.profile = snapshot\ninit.u.path = out/snapshots/u_000010.kslg")
    assert main(["run", str(_write(tmp_path, text, "snap.txt")), "--out", str(tmp_path / "o2")]) == 0
    assert read_csv(tmp_path / "o2" / "diagnostics.csv")[0].mass_u == pytest.approx(2.0, rel=1e-12)


finite = st.floats(0.01, 100.0, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(chi=finite, a=finite, b=finite, k=st.floats(2.0, 1e6), cells=st.integers(4, 64),
       ext=finite, t_end=st.floats(0.0, 10.0), scheme=st.sampled_from(["explicit", "imex"]),
       values=st.lists(st.floats(2.0, 512.0), max_size=4), amp=finite,
       profile=st.sampled_from(["gaussian-bump", "two-bumps", "checkerboard-positive"]))
def test_config_roundtrip(chi, a, b, k, cells, ext, t_end, scheme, values, amp, profile):
    text = "\n".join([
        f"model.chi = {chi!r}", f"model.a = {a!r}", f"model.b = {b!r}", f"model.k = {k!r}",
        f"grid.extents = {ext!r}, {ext / 2!r}", f"grid.cells = {cells}, 4",
        f"init.u.profile = {profile}", f"init.u.amplitude = {amp!r}",
        "init.v.profile = constant", f"solver.t_end = {t_end!r}", "solver.dt_max = 0.1",
        f"solver.scheme = {scheme}", "sweep.axis = k",
        "sweep.values = " + ", ".join(repr(v) for v in values),
    ])
    cfg = config_mod.parse_text(text)
    again = config_mod.parse_text(config_mod.serialize(cfg))
    assert again == cfg
    assert config_mod.serialize(again) == config_mod.serialize(cfg)


def test_config_rejects_unknown_and_duplicate():
    base = STEADY.format(v="1.0", t_end=1.0)
    with pytest.raises(config_mod.ConfigError):
        config_mod.parse_text(base + "model.x = 3\n")
    with pytest.raises(config_mod.ConfigError):
        config_mod.parse_text(base + "model.k = 3\n")
    with pytest.raises(config_mod.ConfigError):
        config_mod.parse_text(base + "sweep.axis = a\n")
