"""Front lift, straightening map, boundary matrix and the V-transform.

The moving domain {x1 > phi(t, x')} is mapped to the fixed slab by
Phi(t, x) = x1 + Psi(t, x) with Psi = chi(x1) * phi(t, x').
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from .errors import LiftViolation, ParameterError
from .grid import Grid, bdf2, spectral_derivative

CHI_SLOPE_LIMIT = 0.45  # 1/2 with the required 0.05 margin
_FLATNESS = 0.05


def _bump(y):
    out = np.zeros_like(y)
    inside = (y > 0) & (y < 1)
    yi = y[inside]
    out[inside] = np.exp(-_FLATNESS / (yi * (1.0 - yi)))
    return out


@dataclass(frozen=True, eq=False)
class CutoffChi:
    """Smooth cutoff with chi = 1 on [0, 1] and chi = 0 for x1 >= radius."""

    radius: float
    samples: np.ndarray
    values: np.ndarray
    spline: CubicSpline
    max_slope: float

    def _eval(self, x, nu):
        x = np.asarray(x, dtype=float)
        inner = self.spline(np.clip(x, 1.0, self.radius), nu)
        if nu == 0:
            return np.where(x <= 1.0, 1.0, np.where(x >= self.radius, 0.0, inner))
        return np.where((x <= 1.0) | (x >= self.radius), 0.0, inner)

    def __call__(self, x):
        return self._eval(x, 0)

    def d1(self, x):
        return self._eval(x, 1)

    def d2(self, x):
        return self._eval(x, 2)


@lru_cache(maxsize=8)
def make_cutoff(support_radius: float = 4.0, samples: int = 4001) -> CutoffChi:
    """Build chi from an integrated flat-top bump; refuse if max|chi'| >= 0.45."""
    if support_radius <= 1.0:
        raise ParameterError("cutoff support radius must exceed 1", module="geometry",
                             operation="make_cutoff")
    if samples < 16:
        raise ParameterError("too few cutoff samples", module="geometry", operation="make_cutoff")
    y = np.linspace(0.0, 1.0, samples)
    ramp = cumulative_trapezoid(_bump(y), y, initial=0.0)
    ramp /= ramp[-1]
    x = 1.0 + (support_radius - 1.0) * y
    values = 1.0 - ramp
    spline = CubicSpline(x, values, bc_type="clamped")
    fine = np.linspace(1.0, support_radius, 4 * samples)
    max_slope = float(np.max(np.abs(spline(fine, 1))))
    if max_slope >= CHI_SLOPE_LIMIT:
        raise ParameterError(
            f"cutoff slope {max_slope:.3f} violates |chi'| < 1/2 with margin; increase support radius",
            module="geometry", operation="make_cutoff")
    return CutoffChi(support_radius, x, values, spline, max_slope)


@dataclass(frozen=True)
class ShiftProfile:
    """Linear pressure profile 2*eps*x1 removed from the unknown."""

    eps: float = 0.1
    G: float = 1.0

    def __post_init__(self):
        if self.eps <= 0:
            raise ParameterError("eps must be positive", module="geometry")

    @property
    def eps1(self) -> float:
        return 2.0 * self.eps / self.G

    def field(self, x1) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        out = np.zeros(x1.shape + (5,))
        out[..., 0] = 2.0 * self.eps * x1
        return out

    def d1(self) -> np.ndarray:
        return np.array([2.0 * self.eps, 0.0, 0.0, 0.0, 0.0])


def shift_unknown(U, profile: ShiftProfile, x1, direction: str = "to-shifted"):
    """Subtract (to-shifted) or add (from-shifted) the profile along x1 axis.

    ``x1`` must broadcast against ``U[..., 0]``.
    """
    shift = 2.0 * profile.eps * np.asarray(x1)
    out = np.array(U, copy=True)
    if direction == "to-shifted":
        out[..., 0] = out[..., 0] - shift
    elif direction == "from-shifted":
        out[..., 0] = out[..., 0] + shift
    else:
        raise ParameterError(f"unknown direction '{direction}'", module="geometry")
    return out


@dataclass(frozen=True, eq=False)
class StraightenedGeometry:
    """Psi and its first derivatives on a space-time grid, shape (nt, n1, n2, n3)."""

    Psi: np.ndarray
    dtPsi: np.ndarray
    d2Psi: np.ndarray
    d3Psi: np.ndarray
    d1Phi: np.ndarray

    def at_boundary(self) -> "StraightenedGeometry":
        return StraightenedGeometry(*(a[:, 0] for a in
                                      (self.Psi, self.dtPsi, self.d2Psi, self.d3Psi, self.d1Phi)))

    @property
    def min_d1Phi(self) -> float:
        return float(np.min(np.real(self.d1Phi)))


def front_derivatives(phi, grid: Grid):
    """(D_t phi, D_2 phi, D_3 phi) on the boundary grid (nt, n2, n3)."""
    return (bdf2(phi, grid.dt, 0), spectral_derivative(phi, grid.L2, 1),
            spectral_derivative(phi, grid.L3, 2))


def lift_front(phi, chi: CutoffChi, grid: Grid, check: bool = True) -> StraightenedGeometry:
    phi = np.asarray(phi)
    c = chi(grid.x1)[None, :, None, None]
    dc = chi.d1(grid.x1)[None, :, None, None]
    dt, d2, d3 = front_derivatives(phi, grid)
    geom = StraightenedGeometry(
        Psi=c * phi[:, None],
        dtPsi=c * dt[:, None],
        d2Psi=c * d2[:, None],
        d3Psi=c * d3[:, None],
        d1Phi=1.0 + dc * phi[:, None],
    )
    if check:
        d1r = np.real(geom.d1Phi)
        if np.min(d1r) < 0.5:
            loc = tuple(int(i) for i in np.unravel_index(np.argmin(d1r), d1r.shape))
            raise LiftViolation(f"d1Phi = {np.min(d1r):.4f} < 1/2", module="geometry",
                                operation="lift_front", location=loc)
    return geom


def boundary_matrix(system, dtPsi, d2Psi, d3Psi, d1Phi):
    """A1-tilde = (A1 - A0 dtPsi - A2 d2Psi - A3 d3Psi) / d1Phi, broadcast."""
    A1, A2, A3 = system.A
    ex = lambda a: np.asarray(a)[..., None, None]
    return (A1 - system.A0 * ex(dtPsi) - A2 * ex(d2Psi) - A3 * ex(d3Psi)) / ex(d1Phi)


def frak_f(v, dtPsi, d2Psi, d3Psi):
    """Relative normal speed v1 - v2 d2Psi - v3 d3Psi - dtPsi."""
    return v[..., 0] - v[..., 1] * d2Psi - v[..., 2] * d3Psi - dtPsi


def normal_vector(d2phi, d3phi):
    ones = np.ones_like(d2phi)
    return np.stack([ones, -d2phi, -d3phi], axis=-1)


def pair_vector(Atilde):
    """Generalized normal a_hat/d1Phi: the pressure row of A1-tilde, velocity part."""
    return Atilde[..., 0, 1:4]


def v_transform(a_hat):
    """J with U_dot = J V, where V[1] = a_hat . v_dot; returns (J, J^{-1}).

    For the classical system a_hat = N = (1, -d2Psi, -d3Psi) and the middle row
    reads (0, 1, d2Psi, d3Psi, 0).
    """
    a_hat = np.asarray(a_hat)
    a1 = a_hat[..., 0]
    shape = a_hat.shape[:-1] + (5, 5)
    J = np.broadcast_to(np.eye(5), shape).astype(np.result_type(a_hat.dtype, float)).copy()
    Jinv = J.copy()
    J[..., 1, 1] = 1.0 / a1
    J[..., 1, 2] = -a_hat[..., 1] / a1
    J[..., 1, 3] = -a_hat[..., 2] / a1
    Jinv[..., 1, 1:4] = a_hat
    return J, Jinv


def classical_normal(d2Psi, d3Psi):
    return normal_vector(np.asarray(d2Psi), np.asarray(d3Psi))


def lift_slice(phi, phi_t, chi: CutoffChi, grid: Grid) -> StraightenedGeometry:
    """Geometry on one time slice from phi(x') and its time derivative.

    Shapes: phi, phi_t (n2, n3) -> fields (n1, n2, n3). Complex input allowed.
    """
    c = chi(grid.x1)[:, None, None]
    dc = chi.d1(grid.x1)[:, None, None]
    return StraightenedGeometry(
        Psi=c * phi[None],
        dtPsi=c * phi_t[None],
        d2Psi=c * spectral_derivative(phi, grid.L2, 0)[None],
        d3Psi=c * spectral_derivative(phi, grid.L3, 1)[None],
        d1Phi=1.0 + dc * phi[None],
    )
