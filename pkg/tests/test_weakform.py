import csv
from types import SimpleNamespace

import numpy as np
import pytest

from kslog.grid import Grid
from kslog.params import ModelParams
from kslog.solver import SolverConfig, Trajectory, run
from kslog.weakform import (
    REPORT_HEADER, SpatialTest, SupportError, TemporalTest, TestFunctionPair, WeakFormConfig,
    ZeroTemporal, assemble_superu, assemble_superv, build_bases, gauss_green_pairing,
    spatial_basis, temporal_basis, trace_check, verify, write_report,
)


def _constant_traj(c_u, c_v, p, t_end=1.0, n=40, cells=8):
    g = Grid((1.0,), (cells,))
    traj = Trajectory(g, p)
    for t in np.linspace(0.0, t_end, n + 1):
        traj.times.append(float(t))
        traj.u.append(np.full(g.shape, c_u))
        traj.v.append(np.full(g.shape, c_v))
    return traj


def test_mode_zero_is_constant_two():
    g = Grid((1.0,), (8,))
    phi = spatial_basis(g, 1)[0]
    assert np.all(phi.on_cells(g) == 2.0)
    assert all(np.all(gr == 0) for gr in phi.grad_on_faces(g))


def test_mode_one_zero_normal_derivative():
    phi = SpatialTest("phi", (1,), (1.0,))
    assert abs(phi.partial(0, np.array([0.0, 1.0]))).max() < 1e-15
    phi2 = SpatialTest("phi", (1, 2), (1.0, 2.0))
    assert np.all(phi2.value(np.linspace(0, 1, 9), 0.3) >= 0)


def test_gradients_analytic():
    phi = SpatialTest("phi", (3,), (2.0,))
    x = np.linspace(0.1, 1.9, 7)
    fd = (phi.value(x + 1e-6) - phi.value(x - 1e-6)) / 2e-6
    np.testing.assert_allclose(phi.partial(0, x), fd, rtol=1e-6, atol=1e-8)
    psi = TemporalTest("psi", 0.5, 0.3)
    t = np.linspace(0.25, 0.75, 11)
    fd = (psi.value(t + 1e-7) - psi.value(t - 1e-7)) / 2e-7
    np.testing.assert_allclose(psi.derivative(t), fd, rtol=1e-5, atol=1e-7)


def test_temporal_support_and_degenerate_width():
    with pytest.raises(SupportError):
        TemporalTest("late", 1.2, 0.1).check_support(1.0)
    with pytest.raises(ValueError):
        TemporalTest("flat", 0.5, 0.0)
    basis = temporal_basis(1.0, 5)
    assert basis[0].value(0.0) == 1.0
    assert all(psi.support[1] <= 1.0 + 1e-12 for psi in basis)


def test_default_basis_size():
    bases = build_bases(Grid((1.0, 1.0), (6, 6)), 2.0, WeakFormConfig())
    assert len(bases) == 30
    assert len({tf.phi.ident for tf in bases}) == 6


def test_weakform_config_exponent_range():
    assert WeakFormConfig(n=3).trace_exponent == pytest.approx(1.25)
    assert WeakFormConfig().trace_exponent == 1.5
    with pytest.raises(ValueError):
        WeakFormConfig(trace_exponent=1.6, n=3)
    with pytest.raises(ValueError):
        WeakFormConfig(trace_exponent=1.0)


def test_superu_steady_state_closed_form():
    p = ModelParams(1.0, 1.0, 1.0, k=1e15)
    traj = _constant_traj(1.0, 1.0, p)
    tf = TestFunctionPair(spatial_basis(traj.grid, 1)[0], TemporalTest("psi", 0.5, 0.3))
    r = assemble_superu(traj, tf)
    assert abs(r.lhs) < 1e-12 and abs(r.rhs) < 1e-12


def test_zero_psi_gives_zero():
    p = ModelParams(1.0, 1.0, 1.0)
    traj = _constant_traj(1.3, 0.7, p)
    tf = TestFunctionPair(spatial_basis(traj.grid, 2)[1], ZeroTemporal())
    r = assemble_superu(traj, tf)
    assert r.lhs == 0.0 and r.rhs == 0.0
    s = assemble_superv(traj, tf)
    assert s.residual == 0.0 and s.defect_pairing == 0.0
    assert trace_check(traj, ZeroTemporal(), "grad_v").max_pairing == 0.0


def test_superv_unit_state_half():
    # u = 1 and v = 1/2 is the steady state of v' = -v + u/(1+u/k) at k = 1;
    # the saturation gap u^2/(k+u) is 1/2 per unit psi-mass
    p = SimpleNamespace(chi=1.0, a=1.0, b=1.0, n=1, k=1.0)
    traj = _constant_traj(1.0, 0.5, p, n=40)
    psi = TemporalTest("psi", 0.5, 0.4)
    norm1 = 0.4 * 16.0 / 15.0  # int (1 - s^2)^2 ds over (-1, 1) is 16/15
    phi = spatial_basis(traj.grid, 1)[0]  # phi = 2
    s = assemble_superv(traj, TestFunctionPair(phi, psi), p)
    assert s.residual / (2 * norm1) == pytest.approx(0.5, rel=1e-12)
    assert s.defect_pairing / (2 * norm1) == pytest.approx(0.5, rel=1e-12)


def test_synthetic_unit_flux_face_measure():
    for g in (Grid((1.0,), (8,)), Grid((2.0, 3.0), (8, 12))):
        # unit outward flux through one boundary face only
        F = list(g.zero_faces())
        if g.dims == 1:
            F[0][-1] = 1.0
            measure = 1.0
        else:
            F[0][-1, 5] = 1.0
            measure = g.h[1]
        pairing, _ = gauss_green_pairing(g, tuple(F), np.ones(g.shape))
        assert pairing == pytest.approx(measure, abs=1e-12)


def _bump_run(cells=32, t_end=0.3):
    g = Grid((4.0,), (cells,))
    (x,) = g.centers()
    u0 = 1 + 2 * np.exp(-((x - 1.5) ** 2) / 0.2)
    return run(g, u0, np.ones(cells), ModelParams(1.0, 1.0, 1.0), SolverConfig(t_end, 0.005, scheme="imex"))


def test_trace_checks_on_solver_run():
    traj = _bump_run()
    for psi in temporal_basis(traj.horizon, 3):
        for which in ("flux_pr", "grad_v"):
            rep = trace_check(traj, psi, which)
            assert rep.max_pairing <= 1e-10 * max(rep.scale, 1.0)
            assert rep.lp_norm >= 0 and rep.div_measure >= 0
    with pytest.raises(ValueError):
        trace_check(traj, temporal_basis(traj.horizon, 3)[1], "nonsense")


def test_superv_nonnegative_and_matches_defect():
    traj = _bump_run()
    for tf in build_bases(traj.grid, traj.horizon, WeakFormConfig()):
        s = assemble_superv(traj, tf)
        assert s.residual >= -1e-8
        assert abs(s.residual - s.defect_pairing) <= 5e-2 * s.scale


def test_verify_and_report(tmp_path):
    traj = _bump_run()
    rows = verify(traj)
    checks = {r.check for r in rows}
    assert checks == {"superu", "superv", "trace_flux_pr", "trace_grad_v", "mass_control"}
    write_report(tmp_path / "v.csv", rows)
    with open(tmp_path / "v.csv") as fh:
        read = list(csv.reader(fh))
    assert tuple(read[0]) == REPORT_HEADER and len(read) == len(rows) + 1
