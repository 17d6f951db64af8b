"""Equations of state and the symmetric-hyperbolic Euler systems.

The unknown is ``U = (p, v1, v2, v3, S)`` for the classical system and
``U = (p, u1, u2, u3, S)`` for the special-relativistic one, where ``u`` is the
spatial part of the four-velocity. All assembly routines broadcast over any
leading shape: ``U[..., 5] -> A[..., 5, 5]``. They only use analytic numpy
operations so that complex-step differentiation passes straight through.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import AdmissibilityError, CausalityError, ParameterError

NCOMP = 5
COMPONENTS = ("p", "v1", "v2", "v3", "S")
REL_COMPONENTS = ("p", "u1", "u2", "u3", "S")


class EquationOfState(Protocol):
    name: str

    def rho(self, p, S): ...
    def rho_p(self, p, S): ...
    def rho_S(self, p, S): ...
    def e(self, rho, S): ...
    def h(self, p, S): ...


@dataclass(frozen=True)
class StiffenedGas:
    """rho(p, S) = rho_ref*exp(-S/cV) + p/c0**2.

    Admissible at p = 0, so the vacuum condition can be imposed. The internal
    energy is the one consistent with de = p/rho**2 drho at fixed S; it equals
    ``e0`` at p = 0, which makes h = 1 there when ``e0 = 0``.
    """

    rho_ref: float = 1.0
    c0: float = 1.0
    cV: float = 1.0
    e0: float = 0.0
    name: str = "stiffened"

    def __post_init__(self):
        if self.rho_ref <= 0 or self.c0 <= 0 or self.cV <= 0:
            raise ParameterError("stiffened-gas constants must be positive", module="thermo")

    def rho0(self, S):
        return self.rho_ref * np.exp(-S / self.cV)

    def rho(self, p, S):
        return self.rho0(S) + p / self.c0**2

    def rho_p(self, p, S):
        return np.ones_like(p) / self.c0**2

    def rho_S(self, p, S):
        return -self.rho0(S) / self.cV + 0.0 * p

    def e(self, rho, S):
        r0 = self.rho0(S)
        return self.e0 + self.c0**2 * (np.log(rho / r0) - 1.0 + r0 / rho)

    def h(self, p, S):
        rho = self.rho(p, S)
        return 1.0 + self.e(rho, S) + p / rho


@dataclass(frozen=True)
class Polytropic:
    """p = K(S) rho**gamma with K = K0*exp(S/cV). Degenerates at p = 0."""

    K0: float = 1.0
    gamma: float = 1.4
    cV: float = 1.0
    name: str = "polytropic"

    def __post_init__(self):
        if self.K0 <= 0 or self.gamma <= 1 or self.cV <= 0:
            raise ParameterError("polytropic constants out of range", module="thermo")

    def K(self, S):
        return self.K0 * np.exp(S / self.cV)

    def rho(self, p, S):
        return (p / self.K(S)) ** (1.0 / self.gamma)

    def rho_p(self, p, S):
        return self.rho(p, S) / (self.gamma * p)

    def rho_S(self, p, S):
        return -self.rho(p, S) / (self.gamma * self.cV)

    def e(self, rho, S):
        return self.K(S) * rho ** (self.gamma - 1.0) / (self.gamma - 1.0)

    def h(self, p, S):
        rho = self.rho(p, S)
        return 1.0 + self.e(rho, S) + p / rho


def make_eos(name: str = "stiffened", **constants) -> EquationOfState:
    if name == "stiffened":
        keys = ("rho_ref", "c0", "cV", "e0")
        return StiffenedGas(**{k: v for k, v in constants.items() if k in keys})
    if name == "polytropic":
        keys = ("K0", "gamma", "cV")
        return Polytropic(**{k: v for k, v in constants.items() if k in keys})
    raise ParameterError(f"unknown equation of state '{name}'", module="thermo", operation="make_eos")


# -- predicates --------------------------------------------------------------

def check_hyperbolicity(rho, rho_p):
    """A0 > 0 iff rho > 0 and rho_p > 0. Returns (ok, margin) elementwise."""
    rho = np.real(np.asarray(rho, dtype=complex))
    rho_p = np.real(np.asarray(rho_p, dtype=complex))
    with np.errstate(invalid="ignore"):
        margin = np.minimum(rho, rho_p)
    ok = np.isfinite(margin) & (margin > 0)
    return (bool(ok) if ok.ndim == 0 else ok), (float(margin) if margin.ndim == 0 else margin)


def check_causality(c2, h):
    """Relativistic causality 0 < c2/h < 1. Returns (ok, margin)."""
    c2 = np.real(np.asarray(c2, dtype=complex))
    h = np.real(np.asarray(h, dtype=complex))
    with np.errstate(divide="ignore", invalid="ignore"):
        cs2 = c2 / h
        margin = np.minimum(cs2, 1.0 - cs2)
    ok = np.isfinite(margin) & (margin > 0)
    return (bool(ok) if ok.ndim == 0 else ok), (float(margin) if margin.ndim == 0 else margin)


def lorentz_factor(u):
    u = np.asarray(u)
    return np.sqrt(1.0 + np.sum(u * u, axis=-1))


def _first_bad(mask):
    idx = np.argwhere(~np.asarray(mask))
    return None if idx.size == 0 else tuple(int(i) for i in idx[0])


@dataclass(frozen=True)
class SymmetricSystem:
    A0: np.ndarray
    A: tuple  # (A1, A2, A3)
    Q: np.ndarray


# -- assembly ----------------------------------------------------------------

def _ensure_admissible(eos, p, S, operation):
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = eos.rho(p, S)
        rp = eos.rho_p(p, S)
    rho_r, rp_r = np.real(rho), np.real(rp)
    for label, arr in (("rho > 0", rho_r), ("rho_p > 0", rp_r)):
        good = np.isfinite(arr) & (arr > 0)
        if not np.all(good):
            raise AdmissibilityError(f"admissibility failed: {label}", module="thermo",
                                     operation=operation, location=_first_bad(good))
    return rho, rp


def assemble_euler_matrices(U, eos, G: float = 1.0, check: bool = True) -> SymmetricSystem:
    U = np.asarray(U)
    p, v, S = U[..., 0], U[..., 1:4], U[..., 4]
    if check:
        rho, rp = _ensure_admissible(eos, p, S, "assemble_euler_matrices")
    else:
        rho, rp = eos.rho(p, S), eos.rho_p(p, S)
    shape = U.shape[:-1] + (NCOMP, NCOMP)
    dtype = np.result_type(U.dtype, float)
    A0 = np.zeros(shape, dtype=dtype)
    A0[..., 0, 0] = rp / rho
    for i in (1, 2, 3):
        A0[..., i, i] = rho
    A0[..., 4, 4] = 1.0
    As = []
    for j in range(3):
        vj = v[..., j]
        Aj = np.zeros(shape, dtype=dtype)
        Aj[..., 0, 0] = vj * rp / rho
        Aj[..., 0, j + 1] = 1.0
        Aj[..., j + 1, 0] = 1.0
        for i in (1, 2, 3):
            Aj[..., i, i] = rho * vj
        Aj[..., 4, 4] = vj
        As.append(Aj)
    Q = np.zeros(U.shape, dtype=dtype)
    Q[..., 1] = -rho * G
    return SymmetricSystem(A0, tuple(As), Q)


def assemble_relativistic_matrices(U, eos, G: float = 1.0, q_sign: float = 1.0,
                                   check: bool = True) -> SymmetricSystem:
    U = np.asarray(U)
    p, u, S = U[..., 0], U[..., 1:4], U[..., 4]
    Gam = lorentz_factor(u)
    v = u / Gam[..., None]
    if check:
        rho, rp = _ensure_admissible(eos, p, S, "assemble_relativistic_matrices")
        h = eos.h(p, S)
        ok, _ = check_causality(1.0 / np.real(rp), np.real(h))
        if not np.all(ok):
            raise CausalityError("causality failed: 0 < c_s^2 < 1", module="thermo",
                                 operation="assemble_relativistic_matrices",
                                 location=_first_bad(np.atleast_1d(ok)))
        if np.any(np.real(np.sum(v * v, axis=-1)) >= 1.0):
            raise CausalityError("causality failed: |v| < 1", module="thermo",
                                 operation="assemble_relativistic_matrices")
    else:
        rho, rp, h = eos.rho(p, S), eos.rho_p(p, S), eos.h(p, S)
    shape = U.shape[:-1] + (NCOMP, NCOMP)
    dtype = np.result_type(U.dtype, float)
    B = np.eye(3) - v[..., :, None] * v[..., None, :]
    A0 = np.zeros(shape, dtype=dtype)
    A0[..., 0, 0] = Gam * rp / rho
    A0[..., 0, 1:4] = v
    A0[..., 1:4, 0] = v
    A0[..., 1:4, 1:4] = (rho * h * Gam)[..., None, None] * B
    A0[..., 4, 4] = 1.0
    As = []
    for j in range(3):
        Aj = np.zeros(shape, dtype=dtype)
        Aj[..., 0, 0] = u[..., j] * rp / rho
        Aj[..., 0, j + 1] = 1.0
        Aj[..., j + 1, 0] = 1.0
        Aj[..., 1:4, 1:4] = (rho * h * u[..., j])[..., None, None] * B
        Aj[..., 4, 4] = v[..., j]
        As.append(Aj)
    Q = np.zeros(U.shape, dtype=dtype)
    Q[..., 1] = -q_sign * rho * G
    return SymmetricSystem(A0, tuple(As), Q)


@dataclass(frozen=True)
class FluidModel:
    """Bundle of the equation of state and the physical switches."""

    eos: object = field(default_factory=StiffenedGas)
    G: float = 1.0
    relativistic: bool = False
    q_sign: float = 1.0

    @property
    def components(self):
        return REL_COMPONENTS if self.relativistic else COMPONENTS

    def system(self, U, check: bool = False) -> SymmetricSystem:
        if self.relativistic:
            return assemble_relativistic_matrices(U, self.eos, self.G, self.q_sign, check)
        return assemble_euler_matrices(U, self.eos, self.G, check)

    def velocity(self, U):
        """Coordinate velocity v (equals u/Gamma in the relativistic case)."""
        if self.relativistic:
            u = U[..., 1:4]
            return u / lorentz_factor(u)[..., None]
        return U[..., 1:4]

    def velocity_to_state(self, v):
        if self.relativistic:
            return v / np.sqrt(1.0 - np.sum(v * v, axis=-1))[..., None]
        return v

    def rho(self, U):
        return self.eos.rho(U[..., 0], U[..., 4])

    def admissibility(self, U) -> tuple[np.ndarray, np.ndarray]:
        p, S = U[..., 0], U[..., 4]
        with np.errstate(invalid="ignore", divide="ignore"):
            ok, margin = check_hyperbolicity(self.eos.rho(p, S), self.eos.rho_p(p, S))
        if self.relativistic:
            with np.errstate(invalid="ignore", divide="ignore"):
                okc, mc = check_causality(1.0 / np.real(self.eos.rho_p(p, S)), np.real(self.eos.h(p, S)))
                v = self.velocity(np.real(U))
                mv = 1.0 - np.sum(v * v, axis=-1)
            ok = ok & okc & (mv > 0)
            margin = np.minimum(np.minimum(margin, mc), mv)
        return ok, margin


def random_admissible_states(model: FluidModel, n: int, rng: np.random.Generator,
                             pmax: float = 0.5, vmax: float = 0.5) -> np.ndarray:
    """Sample n admissible point states for property sweeps."""
    U = np.empty((n, NCOMP))
    U[:, 0] = rng.uniform(0.0, pmax, n)
    vel = rng.uniform(-vmax, vmax, (n, 3))
    if model.relativistic:
        vel /= np.sqrt(3.0)  # keeps |v| < 1
        vel = model.velocity_to_state(vel)
    U[:, 1:4] = vel
    U[:, 4] = rng.uniform(-0.5, 0.5, n)
    return U
