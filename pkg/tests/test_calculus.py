import numpy as np
import pytest

from vacuum_front.calculus import (Smoother, constant_growth, layerwise_norm, lifting_operator, moser_check,
                                   sobolev_norm, tangential_norm, theta_schedule)
from vacuum_front.errors import ParameterError, ResolutionError
from vacuum_front.grid import Grid, spectral_derivative


@pytest.fixture
def grid():
    return Grid(nt=16, n1=17, n2=16, n3=1, T=1.0, X1=np.pi, ghost=3)


def _past_vanishing(grid, power=3):
    t = grid.t[:, None, None, None]
    return np.where(t > 0, t, 0.0) ** power


# -- norms -------------------------------------------------------------------

def test_h1_of_single_tangential_mode(grid):
    _, _, x2, _ = grid.mesh()
    f = np.sin(x2)
    ratio = sobolev_norm(f, grid, 1) / sobolev_norm(f, grid, 0)
    assert ratio**2 == pytest.approx(2.0, rel=1e-12)


def test_norms_are_monotone_in_order(grid, rng):
    for _ in range(100):
        f = rng.standard_normal(grid.shape)
        vals = [sobolev_norm(f, grid, s) for s in range(4)]
        assert all(a <= b * (1 + 1e-12) for a, b in zip(vals, vals[1:]))


def test_tangential_norm_ignores_normal_derivatives(grid):
    _, x1, _, _ = grid.mesh()
    f = np.cos(3 * x1)
    assert tangential_norm(f, grid, 2) == pytest.approx(sobolev_norm(f, grid, 0), rel=1e-12)
    assert sobolev_norm(f, grid, 2) > 2 * sobolev_norm(f, grid, 0)


def test_layerwise_norm_of_constant_in_time_field(grid):
    _, x1, x2, _ = grid.mesh()
    f = np.cos(x2) + 0 * x1
    w = grid.space_weights()
    l2 = np.sqrt(np.sum(w * np.abs(f[5]) ** 2))
    assert layerwise_norm(f, grid, 5, 0) == pytest.approx(l2, rel=1e-12)
    assert layerwise_norm(f, grid, 5, 1) == pytest.approx(np.sqrt(2) * l2, rel=1e-12)


def test_order_above_cap_is_a_resolution_error(grid):
    with pytest.raises(ResolutionError):
        sobolev_norm(np.zeros(grid.shape), grid, 9)
    with pytest.raises(ParameterError):
        sobolev_norm(np.zeros(grid.shape), grid, -1)


# -- Moser --------------------------------------------------------------------

def test_moser_constant_times_field(grid, rng):
    u = rng.standard_normal(grid.shape)
    c = moser_check(u, np.ones(grid.shape), grid, 2)
    assert c <= 1.0 + 1e-12


def test_moser_constant_is_stable_under_refinement():
    consts = []
    for n in (17, 33):
        g = Grid(nt=n, n1=n, n2=16, n3=1, T=1.0, X1=np.pi, ghost=3)
        t, x1, x2, _ = g.mesh()
        u = np.sin(x2) * np.cos(x1) * (1 + t)
        v = np.cos(2 * x2) + 0.5 * np.sin(x1)
        consts.append(moser_check(u, v, g, 2))
    assert abs(consts[1] / consts[0] - 1) < 0.2


def test_norm_converges_under_refinement():
    vals = []
    # same space-time domain at both levels: the ghost region doubles too
    for n, ghost in ((33, 3), (65, 6)):
        g = Grid(nt=n, n1=n, n2=16, n3=1, T=1.0, X1=np.pi, ghost=ghost)
        t, x1, x2, _ = g.mesh()
        vals.append(sobolev_norm(np.sin(x2) * np.cos(x1) * (1 + t**2), g, 3))
    assert abs(vals[1] / vals[0] - 1) < 0.01


# -- theta schedule ------------------------------------------------------------

def test_schedule_first_values():
    s = theta_schedule(1.0, 5)
    assert s.theta[1] == pytest.approx(np.sqrt(2), abs=1e-15)
    assert s.delta[0] == pytest.approx(0.414214, abs=1e-6)
    assert theta_schedule(9.0, 3).delta[0] == pytest.approx(0.162278, abs=1e-6)


def test_schedule_bracket_and_lower_bound():
    assert theta_schedule(1.0, 1000).bracket_holds()
    with pytest.raises(ParameterError):
        theta_schedule(0.5, 3)


# -- smoothing -------------------------------------------------------------------

def test_identity_above_threshold(grid, rng):
    u = rng.standard_normal(grid.shape)
    sm = Smoother(grid, theta_identity=4.0)
    np.testing.assert_array_equal(sm.apply(u, 4.0), u)
    np.testing.assert_array_equal(sm.apply(u, 10.0), u)


def test_high_mode_is_removed_at_small_theta(grid):
    t, _, x2, _ = grid.mesh()
    u = np.cos(7 * x2) * t**2
    assert np.abs(Smoother(grid, 64.0).apply(u, 1.0)).max() < 1e-8


def test_constants_preserved_after_start_up(grid):
    sm = Smoother(grid, 64.0)
    for theta in (1.0, 4.0, 16.0):
        out = sm.apply(np.ones(grid.shape), theta)
        steady = grid.ghost + 1 + len(sm.weights(theta))
        assert np.abs(out[steady:] - 1).max() < 1e-12


def test_smoothing_commutes_with_tangential_derivative(grid):
    t, x1, x2, _ = grid.mesh()
    u = _past_vanishing(grid) * np.cos(x2) * np.cos(x1)
    sm = Smoother(grid, 64.0)
    lhs = spectral_derivative(sm.apply(u, 2.0), grid.L2, 2)
    rhs = sm.apply(spectral_derivative(u, grid.L2, 2), 2.0)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_past_vanishing_is_preserved(grid, rng):
    u = rng.standard_normal(grid.shape) * _past_vanishing(grid, 1)
    for theta in (1.0, 2.0, 8.0):
        out = Smoother(grid, 64.0).apply(u, theta)
        assert np.all(out[grid.past] == 0.0)


def test_theta_below_one_rejected(grid):
    with pytest.raises(ParameterError):
        Smoother(grid).apply(np.zeros(grid.shape), 0.5)


# -- lifting --------------------------------------------------------------------

def test_lifting_of_zero_is_zero(grid):
    out = lifting_operator(np.zeros(grid.boundary_shape), grid)
    assert np.all(out == 0)


def test_lifting_trace_and_past(grid):
    bt, b2, _ = grid.boundary_mesh()
    g = np.sin(b2) * np.where(bt > 0, bt, 0.0) ** 2
    out = lifting_operator(g, grid)
    assert np.abs(out[:, 0] - g).max() < 1e-8
    assert np.all(out[grid.past] == 0)


def test_lifting_gain_is_mode_uniform(grid):
    bt, b2, _ = grid.boundary_mesh()
    gains = []
    for k in (1, 2, 4, 8):
        g = np.cos(k * b2) + 0 * bt
        half = sobolev_norm(g, grid, 0, "boundary") * (1 + k**2) ** 0.25
        gains.append(sobolev_norm(lifting_operator(g, grid), grid, 1) / half)
    assert max(gains) / min(gains) < 1.5


def test_constant_growth_metric():
    thetas = np.array([1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
    assert constant_growth(thetas**-1.0) == 1.0
    assert constant_growth([0.05, 0.2, 0.1, 0.1, 0.07, 0.03]) == 1.0
    assert constant_growth(thetas) == pytest.approx(8.0)
