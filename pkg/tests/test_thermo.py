import numpy as np
import pytest

from vacuum_front.errors import AdmissibilityError, CausalityError, ParameterError
from vacuum_front.thermo import (FluidModel, Polytropic, StiffenedGas, assemble_euler_matrices,
                                 assemble_relativistic_matrices, check_causality, check_hyperbolicity,
                                 lorentz_factor, make_eos, random_admissible_states)


def state(p=0.0, v=(0.0, 0.0, 0.0), S=0.0):
    return np.array([p, *v, S], dtype=float)


def test_unit_density_unit_sound_speed_gives_identity_A0():
    sysm = assemble_euler_matrices(state(), StiffenedGas())
    assert np.array_equal(sysm.A0, np.eye(5))
    A1 = sysm.A[0]
    assert A1[0, 1] == 1.0 and A1[1, 0] == 1.0
    expect = np.zeros((5, 5))
    expect[0, 1] = expect[1, 0] = 1.0
    assert np.array_equal(A1, expect)


def test_hand_substituted_A1_entries():
    # rho = 2, c^2 = 4, v = (1, 0, 0)
    eos = StiffenedGas(rho_ref=2.0, c0=2.0)
    A1 = assemble_euler_matrices(state(v=(1.0, 0, 0)), eos).A[0]
    assert A1[0, 0] == pytest.approx(1.0 / 8.0, abs=1e-15)
    assert A1[1, 1] == pytest.approx(2.0, abs=1e-15)


def test_gravity_source():
    Q = assemble_euler_matrices(state(), StiffenedGas(), G=2.5).Q
    assert np.array_equal(Q, [0.0, -2.5, 0.0, 0.0, 0.0])


@pytest.mark.parametrize("relativistic", [False, True])
def test_random_states_symmetric_and_positive(relativistic, rng):
    model = FluidModel(StiffenedGas(c0=0.6 if relativistic else 1.0), relativistic=relativistic)
    U = random_admissible_states(model, 500, rng)
    sysm = model.system(U, check=True)
    for M in (sysm.A0,) + sysm.A:
        assert np.array_equal(M, np.swapaxes(M, -1, -2))
    assert np.linalg.eigvalsh(sysm.A0).min() > 0


def test_entropy_rows_decouple(rng):
    model = FluidModel(StiffenedGas(c0=0.6), relativistic=True)
    U = random_admissible_states(model, 50, rng)
    v = model.velocity(U)
    for j, Aj in enumerate(model.system(U).A):
        assert np.allclose(Aj[:, 4, 4], v[:, j], rtol=0, atol=1e-15)
        assert np.all(Aj[:, 4, :4] == 0) and np.all(Aj[:, :4, 4] == 0)


def test_hyperbolicity_predicate():
    assert check_hyperbolicity(1.0, 1.0) == (True, 1.0)
    assert check_hyperbolicity(1.0, 0.0)[0] is False


def test_stiffened_gas_admissible_at_vacuum_pressure():
    eos = StiffenedGas()
    ok, margin = check_hyperbolicity(eos.rho(0.0, 0.0), eos.rho_p(0.0, 0.0))
    assert ok and margin > 0


def test_polytropic_not_admissible_at_zero_pressure():
    eos = Polytropic()
    with pytest.raises(AdmissibilityError):
        assemble_euler_matrices(state(p=0.0), eos)


def test_relativistic_rest_frame():
    eos = StiffenedGas(c0=0.6)
    sysm = assemble_relativistic_matrices(state(p=0.2), eos)
    rho, h = eos.rho(0.2, 0.0), eos.h(0.2, 0.0)
    assert np.allclose(sysm.A0, np.diag([1 / (rho * 0.36), rho * h, rho * h, rho * h, 1.0]), rtol=1e-15)


def test_relativistic_B_matrix_entry():
    u = np.array([np.sqrt(3.0), 0.0, 0.0])
    assert lorentz_factor(u) == pytest.approx(2.0, abs=1e-15)
    eos = StiffenedGas(c0=0.6)
    sysm = assemble_relativistic_matrices(state(v=u), eos)
    rho, h = eos.rho(0.0, 0.0), eos.h(0.0, 0.0)
    # A0 velocity block = rho h Gamma B with B11 = 1 - 3/4
    assert sysm.A0[1, 1] / (rho * h * 2.0) == pytest.approx(0.25, abs=1e-15)


def test_relativistic_symmetric(rng):
    model = FluidModel(StiffenedGas(c0=0.6), relativistic=True)
    sysm = model.system(random_admissible_states(model, 100, rng))
    for M in (sysm.A0,) + sysm.A:
        assert np.array_equal(M, np.swapaxes(M, -1, -2))


def test_relativistic_q_sign_switch():
    eos = StiffenedGas(c0=0.6)
    plus = assemble_relativistic_matrices(state(), eos, q_sign=1.0).Q
    minus = assemble_relativistic_matrices(state(), eos, q_sign=-1.0).Q
    assert plus[1] == -minus[1] == -1.0


def test_lorentz_factor_values():
    assert lorentz_factor(np.zeros(3)) == 1.0
    assert lorentz_factor(np.ones(3)) == 2.0
    u = np.array([0.3, -1.2, 2.0])
    gam = lorentz_factor(u)
    v = u / gam
    assert (1 - v @ v) ** -0.5 == pytest.approx(gam, rel=1e-15)


def test_causality_predicate():
    ok, margin = check_causality(1.0, 2.0)
    assert ok and margin == 0.5
    assert check_causality(1.5, 1.5)[0] is False
    assert check_causality(0.0, 1.0)[0] is False


def test_superluminal_sound_rejected():
    with pytest.raises(CausalityError):
        assemble_relativistic_matrices(state(), StiffenedGas(c0=1.0))


def test_unknown_eos():
    with pytest.raises(ParameterError):
        make_eos("tabulated")
