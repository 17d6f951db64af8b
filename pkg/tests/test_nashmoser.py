import numpy as np
import pytest

from vacuum_front.errors import ParameterError
from vacuum_front.nashmoser import (Approximation, NashMoserConfig, NashMoserSolver,
                                    approximation_from_data, manufactured_reference, modified_state,
                                    nash_moser_step, rhs_update, run)
from vacuum_front.presets import rest_state

from conftest import make_problem


@pytest.fixture(scope="module")
def solver():
    from vacuum_front.grid import Grid

    P = make_problem(grid=Grid(nt=12, n1=17, n2=8, n3=1, T=0.4, X1=0.8, ghost=3))
    return NashMoserSolver(manufactured_reference(P), NashMoserConfig(max_iter=3))


@pytest.fixture(scope="module")
def two_steps(solver):
    st0 = solver.initial_state()
    st1 = nash_moser_step(solver, st0)
    st2 = nash_moser_step(solver, st1)
    return st0, st1, st2


def test_config_rejects_small_alpha_and_theta0():
    with pytest.raises(ParameterError, match="alpha"):
        NashMoserConfig(alpha=6)
    with pytest.raises(ParameterError, match="theta0"):
        NashMoserConfig(theta0=0.9)
    assert NashMoserConfig().alpha_tilde == 11
    assert NashMoserConfig().s_top == 8


def test_rest_state_needs_no_iterations(problem):
    U0, phi0 = rest_state(problem)
    res = run(lambda T: approximation_from_data(problem, U0, phi0), problem.grid.T, NashMoserConfig())
    assert res.iterations == 0 and res.converged
    assert np.all(res.U_corr == 0) and np.all(res.phi_corr == 0)


def test_first_rhs_is_smoothed_forcing(solver):
    st = solver.initial_state()
    np.testing.assert_array_equal(st.f[0], solver.S(solver.approx.f, 0))
    np.testing.assert_array_equal(st.g[0], solver.Sb(solver.approx.g, 0))


def test_modified_state_of_zero_iterate(solver):
    g = solver.grid
    mod = modified_state(np.zeros(g.shape + (5,)), np.zeros(g.boundary_shape), 1.0, solver.maps,
                         solver.smoother)
    assert np.all(mod.U == 0) and np.all(mod.phi == 0)
    assert mod.defect == 0.0


def test_modified_state_matches_kinematic_row(solver, two_steps):
    _, st1, _ = two_steps
    mod = modified_state(st1.U, st1.phi, float(solver.sched.theta[1]), solver.maps, solver.smoother)
    assert mod.defect < 1e-12


def test_telescoping_and_decomposition(solver, two_steps):
    for row in two_steps[2].rows:
        assert row["telescoping"] < 1e-10
        assert row["decomposition"] < 1e-10
        assert row["incremental_gap"] < 1e-10


def test_rhs_update_matches_step(solver, two_steps):
    st0, st1, st2 = two_steps
    for before, after in ((st0, st1), (st1, st2)):
        f, g = rhs_update(solver, before, after.e_hist[-1], after.et_hist[-1])
        np.testing.assert_allclose(f, after.f[-1], atol=1e-12)
        np.testing.assert_allclose(g, after.g[-1], atol=1e-12)


def test_manufactured_forcing_reproduces_exact_solution(solver):
    a: Approximation = solver.approx
    W, phi = a.exact
    L, B = solver.residuals(W, phi)
    assert np.abs(L).max() == 0.0 and np.abs(B).max() == 0.0
