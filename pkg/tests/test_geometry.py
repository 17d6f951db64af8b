import numpy as np
import pytest

from vacuum_front.errors import LiftViolation, ParameterError
from vacuum_front.geometry import (ShiftProfile, boundary_matrix, frak_f, lift_front, make_cutoff,
                                   shift_unknown, v_transform)
from vacuum_front.grid import Grid
from vacuum_front.thermo import FluidModel, StiffenedGas, assemble_euler_matrices, random_admissible_states


@pytest.fixture
def wide_grid():
    return Grid(nt=10, n1=81, n2=16, n3=1, T=1.0, X1=5.0, ghost=3)


def test_cutoff_plateau_and_support():
    chi = make_cutoff(4.0)
    assert chi(0.5) == 1.0 and chi(0.0) == 1.0
    assert chi(5.0) == 0.0


def test_cutoff_slope_bound():
    chi = make_cutoff(4.0)
    x = np.linspace(0.0, 5.0, 20001)
    assert np.max(np.abs(chi.d1(x))) < 0.5 - 0.05


def test_cutoff_too_narrow_refused():
    with pytest.raises(ParameterError):
        make_cutoff(1.05)
    with pytest.raises(ParameterError):
        make_cutoff(1.0)


def test_flat_front_is_identity(wide_grid):
    g = wide_grid
    geom = lift_front(np.zeros(g.boundary_shape), make_cutoff(), g)
    assert np.all(geom.Psi == 0) and np.all(geom.d1Phi == 1.0)


def test_constant_front_lifts_to_cutoff(wide_grid):
    g = wide_grid
    chi = make_cutoff()
    geom = lift_front(np.ones(g.boundary_shape), chi, g)
    assert np.allclose(geom.Psi[0, :, 0, 0], chi(g.x1))
    assert np.all(geom.Psi[:, 0] == 1.0)


def test_cosine_front_derivative_bound(wide_grid):
    g = wide_grid
    chi = make_cutoff()
    phi = np.broadcast_to(0.5 * np.cos(g.x2)[None, :, None], g.boundary_shape)
    geom = lift_front(phi, chi, g)
    assert geom.min_d1Phi >= 1.0 - 0.5 * chi.max_slope - 1e-9
    assert geom.min_d1Phi > 0.75


def test_lift_violation_reports_location(wide_grid):
    g = wide_grid
    phi = np.full(g.boundary_shape, 3.0)  # chi is decreasing, so d1Phi = 1 + chi' phi < 1/2
    with pytest.raises(LiftViolation) as err:
        lift_front(phi, make_cutoff(), g)
    assert err.value.location is not None


def test_trace_reproduces_front_exactly(wide_grid, rng):
    g = wide_grid
    phi = rng.uniform(-1, 1, g.boundary_shape)
    geom = lift_front(phi, make_cutoff(), g, check=False)
    assert np.array_equal(g.x1[0] + geom.Psi[:, 0], phi)


def test_flat_boundary_matrix_is_A1():
    sysm = assemble_euler_matrices(np.array([0.1, 0.2, 0.3, -0.1, 0.0]), StiffenedGas())
    At = boundary_matrix(sysm, 0.0, 0.0, 0.0, 1.0)
    assert np.array_equal(At, sysm.A[0])


def test_kinematic_front_kills_diagonal_blocks():
    sysm = assemble_euler_matrices(np.array([0.0, 1.0, 0.0, 0.0, 0.0]), StiffenedGas())
    assert frak_f(np.array([1.0, 0, 0]), 1.0, 0.0, 0.0) == 0.0
    At = boundary_matrix(sysm, 1.0, 0.0, 0.0, 1.0)
    assert np.all(np.diag(At) == 0)
    assert At[0, 1] == At[1, 0] == 1.0


def test_rank_two_on_kinematic_fronts(rng):
    model = FluidModel(StiffenedGas())
    U = random_admissible_states(model, 200, rng)
    d2, d3 = rng.uniform(-0.5, 0.5, (2, 200))
    v = U[:, 1:4]
    At = boundary_matrix(model.system(U), v[:, 0] - v[:, 1] * d2 - v[:, 2] * d3, d2, d3, np.ones(200))
    sv = np.linalg.svd(At, compute_uv=False)
    assert np.all(sv[:, 2] < 1e-10 * sv[:, 0]) and np.all(sv[:, 1] > 1e-3)


def test_v_transform_flat_is_identity():
    J, Jinv = v_transform(np.array([1.0, 0.0, 0.0]))
    assert np.array_equal(J, np.eye(5)) and np.array_equal(Jinv, np.eye(5))


def test_v_transform_closed_form_inverse():
    a, b = 0.3, -0.7
    J, Jinv = v_transform(np.array([1.0, -a, -b]))
    assert np.array_equal(J[1], [0, 1, a, b, 0])
    assert (J @ np.eye(5)[1])[1] == 1.0
    assert np.array_equal(Jinv[1], [0, 1, -a, -b, 0])
    assert np.allclose(J @ Jinv, np.eye(5), atol=1e-15)


def test_congruence_to_antidiagonal_pair(rng):
    U = np.array([0.2, 0.4, -0.3, 0.1, 0.05])
    sysm = assemble_euler_matrices(U, StiffenedGas())
    d2, d3, d1Phi = 0.25, -0.4, 1.3
    v = U[1:4]
    dt = v[0] - v[1] * d2 - v[2] * d3
    At = boundary_matrix(sysm, dt, d2, d3, d1Phi)
    J, _ = v_transform(np.array([1.0, -d2, -d3]))
    target = np.zeros((5, 5))
    target[0, 1] = target[1, 0] = 1.0
    assert np.allclose(J.T @ At @ J, target / d1Phi, atol=1e-14)


def test_shift_unknown():
    prof = ShiftProfile(0.5, 1.0)
    x1 = np.linspace(0, 3, 7)
    U = np.zeros((7, 5))
    U[:, 0] = 2 * 0.5 * x1
    assert np.all(shift_unknown(U, prof, x1)[:, 0] == 0)
    assert shift_unknown(np.zeros((1, 5)), prof, np.array([3.0]), "from-shifted")[0, 0] == 3.0


def test_shift_roundtrip(rng):
    prof = ShiftProfile(0.1, 1.0)
    x1 = rng.uniform(0, 1, (4, 1))
    U = rng.standard_normal((4, 6, 5))
    back = shift_unknown(shift_unknown(U, prof, x1), prof, x1, "from-shifted")
    assert np.allclose(back, U, rtol=0, atol=1e-15)


def test_gravity_balance_identity():
    prof = ShiftProfile(0.1, 1.0)
    rho = prof.eps1
    assert 2 * prof.eps / 1.0 - prof.G * rho == 0.0
