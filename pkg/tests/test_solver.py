import numpy as np
import pytest

from mfgellip import grid as gr
from mfgellip import solver as sv
from mfgellip.model import CouplingSpec
from mfgellip.selftest import jacobian_fd_error

from conftest import constant_data_spec, de_spec, make_spec, mixed_2d_spec


@pytest.fixture(scope="module")
def se_solution():
    from mfgellip.selftest import benchmark_se

    spec = benchmark_se()
    grid = gr.GridSpec(1, 16, 8)
    return spec, grid, sv.continuation_solve(spec, grid)


def test_theta_zero_rows_vanish(se_spec):
    grid = gr.GridSpec(1, 16, 8)
    F = sv.residual(sv.build_theta_problem(se_spec, 0.0), grid, np.ones(grid.n_nodes))
    assert np.abs(F).max() <= 1e-14


def test_theta_zero_newton_from_perturbation(se_spec):
    grid = gr.GridSpec(1, 64, 32)
    x = grid.space_points()[..., 0]
    U0 = np.broadcast_to(1 + 0.1 * np.sin(2 * np.pi * x), grid.shape)
    r = sv.newton_solve(se_spec.at_theta(0.0), grid, U0)
    assert r.converged and r.iterations <= 8
    assert np.abs(r.U - 1).max() <= 1e-10


def test_jacobian_matches_differences(se_solution, rng):
    spec, grid, rep = se_solution
    U = rep.u.values.ravel() + 0.05 * rng.standard_normal(grid.n_nodes)
    assert jacobian_fd_error(spec, grid, U, rng, columns=30) <= 1e-6


def test_jacobian_2d_and_viscous(rng):
    spec = mixed_2d_spec()
    grid = gr.GridSpec(2, 8, 4, spec.T)
    U = 1.0 + 0.05 * rng.standard_normal(grid.n_nodes)
    assert jacobian_fd_error(spec, grid, U, rng, columns=30) <= 1e-6
    de = de_spec()
    g1 = gr.GridSpec(1, 16, 8)
    U = 1.0 + (1.0 - g1.times())[:, None] + 0.02 * rng.standard_normal(g1.shape)
    assert jacobian_fd_error(de, g1, U.ravel(), rng, columns=30, epsilon=0.25) <= 1e-6


def test_jacobian_sparsity_and_locality(se_solution):
    spec, grid, rep = se_solution
    U = rep.u.values.ravel().copy()
    F0, J = sv.assemble_residual_and_jacobian(spec, grid, U)
    assert np.diff(J.indptr).max() <= 9
    k = gr.IndexMap(grid).to_flat([5], 4)
    U[k] += 1e-3
    changed = np.flatnonzero(sv.residual(spec, grid, U) != F0)
    assert set(changed) <= set(J[:, k].nonzero()[0])


def test_domain_error_names_node():
    spec = constant_data_spec()
    grid = gr.GridSpec(1, 8, 4)
    U = np.ones(grid.shape) + (1 - grid.times())[:, None]
    U[2, 3] += 50.0
    with pytest.raises(sv.DomainError, match="node"):
        sv.residual(spec, grid, U.ravel())


def test_constant_data_closed_form():
    spec = constant_data_spec()
    grid = gr.GridSpec(1, 16, 8)
    rep = sv.continuation_solve(spec, grid, epsilon_phase=False)
    assert rep.converged
    exact = 1.0 + (spec.T - grid.times())[:, None]
    assert np.abs(rep.u.values - exact).max() <= 1e-9


def test_trivial_spec_takes_one_step():
    spec = make_spec(coupling=CouplingSpec("Linear", a=1.0, b_log=0.0)).at_theta(0.0)
    rep = sv.continuation_solve(spec, gr.GridSpec(1, 16, 8), epsilon_phase=False)
    assert rep.converged
    assert [e.theta for e in rep.path] == [0.0, 1.0]


def test_warm_start_and_determinism(se_solution):
    spec, grid, rep = se_solution
    again = sv.newton_solve(spec, grid, rep.u.values)
    assert again.converged and again.iterations <= 1
    rep2 = sv.continuation_solve(spec, grid)
    assert np.array_equal(rep.u.values, rep2.u.values)
    assert rep.to_dict() == rep2.to_dict()


def test_se_positive_density(se_solution):
    _, _, rep = se_solution
    assert rep.m.values.min() > 0
    assert rep.epsilon == 0.0 and not rep.epsilon_sequence


def test_stalled_is_reported_not_raised():
    spec = de_spec()
    grid = gr.GridSpec(1, 16, 8)
    U0 = 1.0 + 5.0 * np.random.default_rng(3).standard_normal(grid.n_nodes)
    r = sv.newton_solve(spec, grid, U0, sv.NewtonSettings(max_iters=5), epsilon=1e-6)
    assert not r.converged
    assert r.status in {"stalled", "domain_failure"}


def test_de_path_records_epsilon_sequence():
    spec = de_spec()
    grid = gr.GridSpec(1, 16, 8)
    rep = sv.continuation_solve(spec, grid, continuation=sv.ContinuationSettings(epsilon_floor=0.05))
    assert rep.converged
    eps = [e.epsilon for e in rep.epsilon_sequence]
    assert eps[0] == 1.0 and all(b < a for a, b in zip(eps, eps[1:]))
    assert any(w.startswith("cauchy-not-reached") for w in rep.warnings)
    assert rep.m.values.min() > 0


def test_settings_validate():
    with pytest.raises(ValueError):
        sv.ContinuationSettings(epsilon_ratio=1.5)
    with pytest.raises(ValueError):
        sv.NewtonSettings(abs_tol=0.0)


def test_grid_problem_mismatch(se_spec):
    with pytest.raises(ValueError):
        sv.continuation_solve(se_spec, gr.GridSpec(1, 16, 8, T=2.0))
