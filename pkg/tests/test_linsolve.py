import numpy as np
import pytest

from vacuum_front.diagnostics import mms_grid
from vacuum_front.errors import BasicStateViolation
from vacuum_front.geometry import ShiftProfile
from vacuum_front.linsolve import (LinearData, LinearizedProblem, LinearSolution, apply_boundary_operator,
                                   apply_effective_operator, dual_residual, energy_functionals,
                                   entropy_vorticity_residuals, estimate_check_L2,
                                   good_unknown_transform, validate_basic_state)
from vacuum_front.manufactured import build_linear_mms
from vacuum_front.problem import FreeBoundaryProblem
from vacuum_front.thermo import FluidModel, StiffenedGas


def _problem(level=0):
    return FreeBoundaryProblem(FluidModel(StiffenedGas()), ShiftProfile(0.1, 1.0), mms_grid(level))


@pytest.fixture(scope="module")
def mms():
    return build_linear_mms(_problem())


@pytest.fixture(scope="module")
def quiet():
    """Basic state U_hat = 0, phi_hat = 0: fluid at rest on the linear pressure profile."""
    P = _problem()
    g = P.grid
    basic = validate_basic_state(P, np.zeros(g.shape + (5,)), np.zeros(g.boundary_shape),
                                 checks=("lift", "kinematic", "slope"))
    return basic, LinearizedProblem(basic)


# -- basic state ----------------------------------------------------------------

def test_manufactured_basic_state_is_admissible(mms):
    rep = mms.basic.report
    assert rep["violations"] == []
    assert rep["kinematic_defect"] == 0.0
    assert rep["a_hat_min"] == pytest.approx(0.2)


def test_large_front_violates_lift():
    P = _problem()
    g = P.grid
    with pytest.raises(BasicStateViolation) as err:
        validate_basic_state(P, np.zeros(g.shape + (5,)), np.full(g.boundary_shape, 3.0),
                             checks=("lift",))
    assert err.value.violations[0]["constraint"] == "lift"


def test_slope_condition_reported_with_margin():
    P = _problem()
    g = P.grid
    basic = validate_basic_state(P, np.zeros(g.shape + (5,)), np.zeros(g.boundary_shape),
                                 margin=0.5, raise_on_violation=False)
    names = [v["constraint"] for v in basic.report["violations"]]
    assert "slope" in names
    assert basic.report["slope_margin"] == pytest.approx(0.1 - 0.5)


def test_moving_front_without_flow_is_kinematically_inconsistent():
    P = _problem()
    g = P.grid
    phi = 0.1 * np.maximum(g.t, 0.0)[:, None, None] * np.ones(g.boundary_shape)
    with pytest.raises(BasicStateViolation) as err:
        validate_basic_state(P, np.zeros(g.shape + (5,)), phi, checks=("kinematic",))
    assert err.value.violations[0]["constraint"] == "kinematic"


# -- good unknown ------------------------------------------------------------------

def test_good_unknown_is_identity_without_lift(mms, rng):
    g = mms.basic.grid
    U = rng.standard_normal(g.shape + (5,))
    np.testing.assert_array_equal(good_unknown_transform(U, np.zeros(g.shape), mms.basic), U)


def test_good_unknown_round_trip(mms, rng):
    g = mms.basic.grid
    U = rng.standard_normal(g.shape + (5,))
    Psi = 0.1 * rng.standard_normal(g.shape)
    dot = good_unknown_transform(U, Psi, mms.basic)
    back = good_unknown_transform(dot, Psi, mms.basic, "inverse")
    np.testing.assert_allclose(back, U, atol=1e-14)


def test_good_unknown_shifts_pressure_by_profile_slope(quiet, rng):
    basic, _ = quiet
    g = basic.grid
    Psi = rng.standard_normal(g.shape)
    dot = good_unknown_transform(np.zeros(g.shape + (5,)), Psi, basic)
    np.testing.assert_allclose(dot[..., 0], -0.2 * Psi, atol=1e-13)
    assert np.all(dot[..., 1:] == 0)


# -- operators --------------------------------------------------------------------

def test_effective_operator_of_zero(mms):
    g = mms.basic.grid
    assert np.all(apply_effective_operator(np.zeros(g.shape + (5,)), mms.basic, mms.linear) == 0)


def test_effective_operator_on_constant_state_is_zero_order_term(quiet):
    basic, lin = quiet
    g = basic.grid
    c = np.array([0.3, -0.2, 0.1, 0.0, 0.05])
    U = np.broadcast_to(c, g.shape + (5,)).copy()
    out = apply_effective_operator(U, basic, lin, time_derivative=np.zeros_like(U))
    np.testing.assert_allclose(out, np.einsum("...ij,j->...i", lin.C, c), atol=1e-12)


def test_boundary_operator_constant_front(quiet):
    basic, lin = quiet
    g = basic.grid
    out = apply_boundary_operator(np.zeros(g.boundary_shape + (5,)), np.full(g.boundary_shape, 0.5),
                                  basic, lin)
    np.testing.assert_allclose(out[..., 0], 0.0, atol=1e-14)
    np.testing.assert_allclose(out[..., 1], 2 * 0.1 * 0.5, atol=1e-14)


def test_boundary_operator_normal_velocity(quiet):
    basic, lin = quiet
    g = basic.grid
    tr = np.zeros(g.boundary_shape + (5,))
    tr[..., 0], tr[..., 1] = 0.3, 1.0
    out = apply_boundary_operator(tr, np.zeros(g.boundary_shape), basic, lin)
    np.testing.assert_allclose(out[..., 0], -1.0, atol=1e-14)
    np.testing.assert_allclose(out[..., 1], 0.3, atol=1e-14)


# -- solver ----------------------------------------------------------------------

def _forcing(grid, rng, t_on=0.0):
    t = grid.t[:, None, None, None, None]
    f = rng.standard_normal(grid.shape + (5,)) * np.where(t > t_on, (t - t_on) ** 2, 0.0)
    tb = grid.t[:, None, None, None]
    gb = rng.standard_normal(grid.boundary_shape + (2,)) * np.where(tb > t_on, (tb - t_on) ** 2, 0.0)
    return LinearData(f, gb)


def test_zero_data_gives_zero_solution(mms):
    g = mms.basic.grid
    data = LinearData.zeros(g)
    sol = mms.linear.solve(data, "bdf2")
    assert np.all(sol.U == 0) and np.all(sol.phi == 0)
    assert estimate_check_L2(sol, data, g) == 0.0
    assert entropy_vorticity_residuals(sol, data, mms.linear) == (0.0, 0.0)


def test_solver_is_linear(mms, rng):
    g = mms.basic.grid
    d1, d2 = _forcing(g, rng), _forcing(g, rng)
    s1, s2 = mms.linear.solve(d1), mms.linear.solve(d2)
    s12 = mms.linear.solve(LinearData(2 * d1.f - d2.f, 2 * d1.g - d2.g))
    np.testing.assert_allclose(s12.U, 2 * s1.U - s2.U, atol=1e-10)
    np.testing.assert_allclose(s12.phi, 2 * s1.phi - s2.phi, atol=1e-10)


def test_solver_is_causal(mms, rng):
    g = mms.basic.grid
    t_on = g.t[g.ghost + 4]
    sol = mms.linear.solve(_forcing(g, rng, t_on))
    quiet_nodes = g.t <= t_on
    assert np.all(sol.U[quiet_nodes] == 0) and np.all(sol.phi[quiet_nodes] == 0)
    assert np.abs(sol.U[-1]).max() > 0


def test_bdf2_solution_satisfies_discrete_system(mms, rng):
    g = mms.basic.grid
    data = _forcing(g, rng)
    sol = mms.linear.solve(data)
    assert sol.residual < 1e-10


# -- energy ---------------------------------------------------------------------

def test_energy_of_zero_solution(mms):
    g = mms.basic.grid
    sol = mms.linear.solve(LinearData.zeros(g))
    e = energy_functionals(sol, mms.linear)
    assert np.all(e.total == 0) and np.all(e.boundary_flux == 0)


def test_energy_of_constant_vector(quiet):
    basic, lin = quiet
    g = basic.grid
    c = np.array([0.0, 0.0, 0.0, 0.0, 1.0])  # entropy only: A0 entry integrated over the slab
    sol = LinearSolution(np.broadcast_to(c, g.shape + (5,)).copy(), np.zeros(g.boundary_shape))
    e = energy_functionals(sol, lin)
    w = g.space_weights()
    expected = np.sum(w[None] * lin.A0[..., 4, 4], axis=(1, 2, 3))
    np.testing.assert_allclose(e.interior, expected, rtol=1e-13)
    assert np.sum(w) == pytest.approx(g.X1 * g.L2, rel=1e-12)


# -- duality ---------------------------------------------------------------------

def _test_pair(grid, x1_centre):
    t, x1, x2, _ = grid.mesh()
    env = np.exp(-((t - 0.2) / 0.05) ** 2) * np.exp(-((x1 - x1_centre) / 0.08) ** 2)
    U = np.stack([env * np.cos(x2) * (i + 1) for i in range(5)], -1)
    V = np.stack([env * np.sin(x2 + i) for i in range(5)], -1)
    return U, V


def test_dual_residual_of_zero(mms):
    g = mms.basic.grid
    z = np.zeros(g.shape + (5,))
    d = dual_residual(z, z, mms.linear)
    assert (d.green, d.boundary, d.defect) == (0.0, 0.0, 0.0)


def test_dual_defect_shrinks_under_refinement():
    defects = []
    for level in (0, 1, 2):
        mm = build_linear_mms(_problem(level))
        U, V = _test_pair(mm.basic.grid, 0.4)
        defects.append(abs(dual_residual(U, V, mm.linear).defect))
    assert defects[1] < defects[0] / 4 and defects[2] < defects[1] / 4


def test_dual_defect_equals_boundary_pairing():
    rel = []
    for level in (0, 1):
        mm = build_linear_mms(_problem(level))
        g = mm.basic.grid
        t, x1, x2, _ = g.mesh()
        env = np.exp(-((t - 0.2) / 0.05) ** 2) * np.exp(-(x1 / 0.2) ** 2)  # nonzero at x1 = 0
        U = np.stack([env * np.cos(x2) * (i + 1) for i in range(5)], -1)
        V = np.stack([env * (1 + np.sin(x2 + i)) for i in range(5)], -1)
        d = dual_residual(U, V, mm.linear)
        rel.append(abs(d.defect) / abs(d.boundary))
    assert rel[0] < 1e-5 and rel[1] < rel[0] / 4
