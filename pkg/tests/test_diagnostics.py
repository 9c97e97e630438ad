import json

import numpy as np
import pytest

from mfgellip import diagnostics as dg
from mfgellip import grid as gr
from mfgellip import solver as sv

from conftest import constant_data_spec, de_spec, x_independent_spec


@pytest.fixture(scope="module")
def constant_solution():
    spec = constant_data_spec()
    grid = gr.GridSpec(1, 16, 8)
    u = gr.SpaceTimeField(np.broadcast_to(1.0 + (1.0 - grid.times())[:, None], grid.shape).copy(), grid)
    return spec, grid, u


@pytest.fixture(scope="module")
def xind_solution():
    spec = x_independent_spec()
    grid = gr.GridSpec(1, 32, 16)
    rep = sv.continuation_solve(spec, grid)
    assert rep.converged
    return spec, grid, rep


def test_recover_density_examples(constant_solution, se_spec):
    spec, grid, u = constant_solution
    m = dg.recover_density(spec, u)
    assert np.abs(m.values - 1).max() <= 1e-13
    one = gr.SpaceTimeField(np.ones(grid.shape), grid)
    assert np.abs(dg.recover_density(se_spec.at_theta(0.0), one).values - 1).max() <= 1e-14


def test_recover_density_reports_node(constant_solution):
    spec, grid, u = constant_solution
    bad = u.values.copy()
    bad[3, 5] += 40.0
    with pytest.raises(dg.DomainError, match="node"):
        dg.recover_density(spec, gr.SpaceTimeField(bad, grid))


def test_hj_relation_exact_on_recovered_pair(xind_solution):
    spec, grid, rep = xind_solution
    m = dg.recover_density(spec, rep.u)
    w = dg.hj_value(spec, grid, rep.u)
    assert np.abs(w - spec.f(grid.space_points(), m.values)).max() <= 1e-13


def test_constant_solution_is_exact(constant_solution):
    spec, grid, u = constant_solution
    m = dg.recover_density(spec, u)
    fp = dg.fp_residual(spec, u, m)
    assert fp.l2 <= 1e-13 and fp.mass_drift <= 1e-13
    assert dg.energy_identity_residual(spec, u, m) <= 1e-10
    rep = dg.run_diagnostics(spec, u, m, bound_tol=1e-10, fp_tol=1e-12, energy_tol=1e-10)
    assert rep.ok, rep.failures()
    assert rep["u-sharp-bounds"].value <= 1e-12


def test_bounds_on_x_independent_solution(xind_solution):
    spec, grid, rep = xind_solution
    entries = {e.check: e for e in dg.check_solution_bounds(spec, rep.u, rep.m, 1e-3)}
    lo, hi = entries["mT-range"].value
    assert lo >= 0.7 - 1e-3 and hi <= 1.3 + 1e-3
    assert entries["mT-range"].passed
    assert dg.check_ut_bounds(spec, rep.u, rep.m, 1e-3).passed


def test_corruption_is_detected(xind_solution):
    spec, grid, rep = xind_solution
    bad = rep.u.values.copy()
    bad[5, 7] += 10.0
    u = gr.SpaceTimeField(bad, grid)
    entries = {e.check: e for e in dg.check_solution_bounds(spec, u, rep.m, 1e-3)}
    assert not entries["u-sharp-bounds"].passed
    assert not dg.check_ut_bounds(spec, u, rep.m, 1e-3).passed
    m_bad = rep.m.values.copy()
    m_bad[4, 3] *= 0.5
    hj = dg.hj_inequality_check(spec, rep.u, gr.SpaceTimeField(m_bad, grid), 1e-8)
    assert not hj[0].passed


def test_mode_b_is_measurement_only(se_spec):
    grid = gr.GridSpec(1, 16, 8)
    rep = sv.continuation_solve(se_spec, grid)
    entries = dg.check_solution_bounds(se_spec, rep.u, rep.m, 1e-6)
    assert {e.check for e in entries} == {"mT-range", "envelope-offsets"}
    assert all(e.passed is None for e in entries)


def test_lasry_lions_terms(constant_solution, xind_solution):
    spec, grid, u = constant_solution
    m = dg.recover_density(spec, u)
    t = dg.lasry_lions_gap(spec, (u, m, 0.0), (u, m, 0.0), grid)
    assert t.as_tuple() == (0.0, 0.0, 0.0, 0.0)
    xs, xg, xr = xind_solution
    other = sv.continuation_solve(xs, gr.GridSpec(1, 32, 16), initial=None)
    t2 = dg.lasry_lions_gap(xs, (xr.u, xr.m, 0.0), (other.u, other.m, 0.0), xg)
    assert min(t2.as_tuple()) >= -1e-10


def test_lasry_lions_pointwise_terms_nonnegative_for_arbitrary_fields(rng):
    spec = de_spec()
    grid = gr.GridSpec(1, 16, 8)
    a = (rng.standard_normal(grid.shape), np.exp(rng.standard_normal(grid.shape)), 0.0)
    b = (rng.standard_normal(grid.shape), np.exp(rng.standard_normal(grid.shape)), 0.0)
    t = dg.lasry_lions_gap(spec, a, b, grid)
    assert t.m_f >= -1e-10 and t.m_g >= -1e-10
    assert t.m_ab + t.m_ba >= t.lower_bound - 1e-8


def test_h_minus_one_norm_single_mode():
    grid = gr.GridSpec(1, 32, 4)
    x = grid.space_points()[..., 0]
    # |cos(2 pi k x)|_{L2} = 1/sqrt(2), divided by 2 pi k
    for k in (1, 3):
        want = 1 / np.sqrt(2) / (2 * np.pi * k)
        assert dg.h_minus_one_norm(np.cos(2 * np.pi * k * x), grid) == pytest.approx(want, rel=1e-12)
    assert dg.h_minus_one_norm(np.ones(32), grid) == pytest.approx(1.0)


def test_lipschitz_monitor_not_applicable(se_spec):
    grid = gr.GridSpec(1, 16, 8)
    e = dg.lipschitz_monitor(se_spec, [], grid)[0]
    assert e.passed is None and e.note.startswith("not-applicable")


def test_lipschitz_monitor_constant_data():
    spec = constant_data_spec()
    grid = gr.GridSpec(1, 16, 8)
    u = np.broadcast_to(1.0 + (1.0 - grid.times())[:, None], grid.shape)
    seq = [sv.EpsilonSolution(2.0**-k, u, np.ones(grid.shape)) for k in range(5)]
    e = dg.lipschitz_monitor(spec, seq, grid)[0]
    assert e.passed
    assert e.value == pytest.approx([1.0] * 5, abs=1e-12)


def test_refinement_error_and_calibration():
    c = gr.GridSpec(1, 8, 4)
    f = gr.GridSpec(1, 16, 8)
    cu = np.zeros(c.shape)
    fu = np.full(f.shape, 3.0)
    assert dg.refinement_error(cu, c, fu, f) == pytest.approx(1.0)
    assert dg.calibrated_tolerance(1e-20) == 1e-12
    with pytest.raises(ValueError):
        dg.refinement_error(cu, c, np.zeros((7, 12)), gr.GridSpec(1, 12, 6))


def test_report_schema(constant_solution):
    spec, grid, u = constant_solution
    rep = dg.run_diagnostics(spec, u)
    data = json.loads(rep.to_json())
    assert data["schema"] == 1 and data["ok"] is True
    names = [e["check"] for e in data["entries"]]
    assert len(names) == len(set(names))
    assert {"check", "value", "bound", "tol", "passed", "note"} <= set(data["entries"][0])
    with pytest.raises(ValueError):
        rep.add(dg.DiagnosticEntry("mass-drift", 0.0))
