import numpy as np
import pytest

from vacuum_front.compat import (build_approximate_solution, check_compatibility, compute_forcing,
                                 compute_traces, forcing_vs_horizon, one_step_oracle)
from vacuum_front.errors import CompatibilityError, RegularityError
from vacuum_front.presets import (boundary_slope_margin, bump_state, rest_state, wavefront_phi1,
                                  wavefront_state)

from conftest import make_problem


def test_rest_state_has_zero_traces(problem):
    U0, phi0 = rest_state(problem)
    stack = compute_traces(problem, U0, phi0, 3)
    for j in range(1, 4):
        assert np.all(stack.U[j] == 0)
        assert np.all(stack.phi[j] == 0)
    assert check_compatibility(stack).passed


def test_uniform_velocity_moves_flat_front(problem):
    U0, phi0 = rest_state(problem)
    U0[..., 1:4] = problem.model.velocity_to_state(np.array([0.07, 0.0, 0.0]))
    stack = compute_traces(problem, U0, phi0, 1)
    np.testing.assert_allclose(stack.phi[1], 0.07, atol=1e-12)


def test_traces_match_one_step_oracle(problem):
    U0, phi0 = wavefront_state(problem)
    stack = compute_traces(problem, U0, phi0, 2)
    errs = []
    for dt in (1e-3, 5e-4):
        dU, dphi = one_step_oracle(problem, U0, phi0, dt)
        # divided difference = U_1 + dt/2 U_2 + O(dt^2)
        errs.append(np.abs(dU - stack.U[1] - 0.5 * dt * stack.U[2]).max()
                    + np.abs(dphi - stack.phi[1] - 0.5 * dt * stack.phi[2]).max())
    assert errs[1] < errs[0] / 3


def test_boundary_pressure_fails_level_zero(problem):
    U0, phi0 = rest_state(problem)
    U0[..., 0] += 0.1 + problem.grid.x1[:, None, None]
    rep = check_compatibility(compute_traces(problem, U0, phi0, 1))
    assert not rep.passed
    assert rep.failing_level == 0
    assert rep.residuals[0] == pytest.approx(0.1, abs=1e-14)


def test_bump_keeps_slope_margin(problem):
    U0, phi0 = bump_state(problem)
    eps = problem.profile.eps
    assert boundary_slope_margin(problem, U0) >= eps / 2
    rep = check_compatibility(compute_traces(problem, U0, phi0, 1), tol=1e-6)
    assert rep.passed


def test_wavefront_first_front_trace(problem):
    U0, phi0 = wavefront_state(problem)
    stack = compute_traces(problem, U0, phi0, 1)
    np.testing.assert_allclose(stack.phi[1], wavefront_phi1(problem), atol=1e-10)


def test_level_above_budget(problem):
    U0, phi0 = rest_state(problem)
    with pytest.raises(RegularityError):
        compute_traces(problem, U0, phi0, 4, budget=3)


def test_incompatible_data_rejected_with_level(problem):
    U0, phi0 = wavefront_state(problem)
    stack = compute_traces(problem, U0, phi0, 3)
    rep = check_compatibility(stack)
    with pytest.raises(CompatibilityError) as err:
        build_approximate_solution(stack, problem.grid)
    assert err.value.location == rep.failing_level


def test_forcing_vanishes_in_the_past(problem):
    U0, phi0 = bump_state(problem)
    stack = compute_traces(problem, U0, phi0, 2)
    approx = build_approximate_solution(stack, problem.grid, require_compatible=False)
    prob = problem.with_far_field(approx.U, approx.phi)
    fa, ga = compute_forcing(prob, approx)
    past = problem.grid.past
    assert np.all(fa[past] == 0) and np.all(ga[past] == 0)
    assert np.abs(fa[~past]).max() > 0


def test_forcing_shrinks_with_horizon():
    base = make_problem()
    U0, phi0 = bump_state(base)

    def factory(T):
        g = base.grid
        return make_problem(grid=type(g)(g.nt, g.n1, g.n2, g.n3, T, g.X1, g.L2, g.L3, g.ghost))

    half, full = forcing_vs_horizon(factory, U0, phi0, 2, (0.2, 0.4))
    assert half < full
