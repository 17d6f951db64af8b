"""Discrete nonlinear free-boundary operators on the fixed slab.

``U`` is always the shifted unknown (physical pressure minus 2*eps*x1) on the
space-time grid, shape (nt, n1, n2, n3, 5), and ``phi`` the front (nt, n2, n3).

Interior operator::

    L_h(U, phi) = A0 D_t U + A1~ (D_1 U + d_1 U_check) + A2 D_2 U + A3 D_3 U + Q
                  + H_00^{-1} r(U, Psi) p|_{x1=0}  -  H_NN^{-1} P_X (U - U_far)|_{x1=X1}

where r is the velocity part of the pressure row of A1~. The x1 = 0 term
imposes p = 0 weakly without adding energy; the far-field term is the
negative part of A1~ acting on the deviation from a reference state.

Boundary operator::

    B_h(U, phi) = (D_t phi - v . N,  p|_{x1=0}),   N = (1, -D_2 phi, -D_3 phi)
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import (CutoffChi, ShiftProfile, StraightenedGeometry, boundary_matrix,
                       front_derivatives, lift_front, make_cutoff, pair_vector)
from .grid import Grid, apply_along, bdf2, spectral_derivative
from .thermo import FluidModel

CSTEP = 1e-30
ROUNDOFF_FLUSH = 8.0


def mv(M, x):
    return np.einsum("...ij,...j->...i", M, x)


def complex_jacobian(fn, U, h: float = CSTEP):
    """Pointwise Jacobian d fn / d U[..., m] by complex step; returns (..., k, 5)."""
    U = np.asarray(U, dtype=complex)
    cols = []
    for m in range(U.shape[-1]):
        Up = U.copy()
        Up[..., m] += 1j * h
        cols.append(np.imag(fn(Up)) / h)
    return np.stack(cols, axis=-1)


def negative_part(M):
    """Negative semidefinite part of a batch of symmetric matrices."""
    M = np.real(M)
    w, V = np.linalg.eigh(0.5 * (M + np.swapaxes(M, -1, -2)))
    wneg = np.minimum(w, 0.0)
    return np.einsum("...ik,...k,...jk->...ij", V, wneg, V)


@dataclass
class Derivatives:
    """Discrete derivatives of a space-time field."""

    t: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray


@dataclass(eq=False)
class FreeBoundaryProblem:
    model: FluidModel
    profile: ShiftProfile
    grid: Grid
    chi: CutoffChi = field(default_factory=make_cutoff)
    far_state: np.ndarray | None = None  # (nt, n2, n3, 5) reference at x1 = X1
    far_penalty: np.ndarray | None = None  # (nt, n2, n3, 5, 5), negative semidefinite

    # -- building blocks -------------------------------------------------------
    @property
    def check_field(self) -> np.ndarray:
        return self.profile.field(self.grid.x1)[None, :, None, None, :]

    @property
    def d1_check(self) -> np.ndarray:
        return self.profile.d1()

    def physical(self, U):
        return U + self.check_field

    def geometry(self, phi, check: bool = False) -> StraightenedGeometry:
        return lift_front(phi, self.chi, self.grid, check=check)

    def derivatives(self, U) -> Derivatives:
        g = self.grid
        return Derivatives(bdf2(U, g.dt, 0), apply_along(g.D1, U, 1),
                           spectral_derivative(U, g.L2, 2), spectral_derivative(U, g.L3, 3))

    def system(self, U):
        return self.model.system(self.physical(U))

    def with_far_field(self, U_ref, phi_ref) -> "FreeBoundaryProblem":
        """Fix the far-field reference and the x1 = X1 penalty from a state."""
        U_ref = np.asarray(U_ref)
        geom = self.geometry(phi_ref)
        sysm = self.system(U_ref[:, -1:])
        At = boundary_matrix(sysm, geom.dtPsi[:, -1:], geom.d2Psi[:, -1:], geom.d3Psi[:, -1:],
                             geom.d1Phi[:, -1:])[:, 0]
        return replace(self, far_state=np.array(np.real(U_ref[:, -1])), far_penalty=negative_part(At))

    # -- operator pieces ---------------------------------------------------
    def frozen_operator(self, U, dU: Derivatives, geom: StraightenedGeometry):
        """Pointwise part A0 D_t U + A1~(D_1 U + d1 U_check) + A2 D_2 U + A3 D_3 U + Q
        with matrices at U and derivative fields supplied separately."""
        sysm = self.system(U)
        At = boundary_matrix(sysm, geom.dtPsi, geom.d2Psi, geom.d3Psi, geom.d1Phi)
        A1, A2, A3 = sysm.A
        return (mv(sysm.A0, dU.t) + mv(At, dU.x1 + self.d1_check) + mv(A2, dU.x2)
                + mv(A3, dU.x3) + sysm.Q)

    def pair(self, U, geom: StraightenedGeometry):
        """r(U, Psi) at x1 = 0 as a 5-vector field (nt, n2, n3, 5)."""
        U0 = U[:, :1]
        sysm = self.system(U0)
        At = boundary_matrix(sysm, geom.dtPsi[:, :1], geom.d2Psi[:, :1], geom.d3Psi[:, :1],
                             geom.d1Phi[:, :1])[:, 0]
        r = np.zeros(At.shape[:-1], dtype=At.dtype)
        r[..., 1:4] = pair_vector(At)
        return r

    def sat(self, U, geom: StraightenedGeometry):
        g = self.grid
        H = g.H1
        out = np.zeros(U.shape, dtype=np.result_type(U.dtype, geom.Psi.dtype, float))
        out[:, 0] = self.pair(U, geom) * U[:, 0, ..., 0:1] / H[0]
        if self.far_penalty is not None:
            dev = U[:, -1] - (0.0 if self.far_state is None else self.far_state)
            out[:, -1] = -mv(self.far_penalty, dev) / H[-1]
        return out

    def operator(self, U, phi):
        geom = self.geometry(phi)
        return self.frozen_operator(U, self.derivatives(U), geom) + self.sat(U, geom)

    def operator_bound(self, U, phi):
        """Sum of the magnitudes of the summands of L_h (real input), used to
        flush results that are pure cancellation."""
        a = np.abs
        geom = self.geometry(phi)
        dU = self.derivatives(U)
        sysm = self.system(U)
        At = boundary_matrix(sysm, geom.dtPsi, geom.d2Psi, geom.d3Psi, geom.d1Phi)
        out = (mv(a(sysm.A0), a(dU.t)) + mv(a(At), a(dU.x1 + self.d1_check))
               + mv(a(sysm.A[1]), a(dU.x2)) + mv(a(sysm.A[2]), a(dU.x3)) + a(sysm.Q))
        out = out + a(self.sat(U, geom))
        return out

    def interior_without_sat(self, U, phi):
        return self.frozen_operator(U, self.derivatives(U), self.geometry(phi))

    def boundary_operator(self, U, phi):
        g = self.grid
        dt, d2, d3 = front_derivatives(phi, g)
        v = self.model.velocity(self.physical(U)[:, 0])
        vN = v[..., 0] - v[..., 1] * d2 - v[..., 2] * d3
        return np.stack([dt - vN, U[:, 0, ..., 0]], axis=-1)

    def residuals(self, U, phi, F=None, Gb=None):
        L = self.operator(U, phi)
        B = self.boundary_operator(U, phi)
        if F is not None:
            L = L - F
        if Gb is not None:
            B = B - Gb
        return L, B

    # -- spatial operator on one time slice (used by compat) ----------------
    def slice_rhs(self, U, geom: StraightenedGeometry, flush: bool = False):
        """A0^{-1}(A1~(D_1 U + d1 U_check) + A2 D_2 U + A3 D_3 U + Q) on one slice.

        ``U`` has shape (n1, n2, n3, 5); ``geom`` comes from ``lift_slice``.
        Returns (A0, G) with D_t U = -A0^{-1} G. With ``flush`` each entry of G
        that is below the rounding bound of its own summands is set to zero, so
        that exactly balanced states stay exactly stationary.
        """
        g = self.grid
        Uphys = U + self.profile.field(g.x1)[:, None, None, :]
        sysm = self.model.system(Uphys)
        At = boundary_matrix(sysm, geom.dtPsi, geom.d2Psi, geom.d3Psi, geom.d1Phi)
        d1 = apply_along(g.D1, U, 0)
        d2 = spectral_derivative(U, g.L2, 1)
        d3 = spectral_derivative(U, g.L3, 2)
        G = mv(At, d1 + self.d1_check) + mv(sysm.A[1], d2) + mv(sysm.A[2], d3) + sysm.Q
        if flush:
            a = np.abs
            bound = (mv(a(At), a(d1 + self.d1_check)) + mv(a(sysm.A[1]), a(d2))
                     + mv(a(sysm.A[2]), a(d3)) + a(sysm.Q))
            G = np.where(a(G) <= ROUNDOFF_FLUSH * np.finfo(float).eps * bound, 0.0, G)
        return sysm.A0, G

    def slice_time_derivative(self, U, geom, flush: bool = False):
        A0, G = self.slice_rhs(U, geom, flush)
        return -np.linalg.solve(A0, G[..., None])[..., 0]

    def front_speed(self, U0_trace, phi, grid: Grid | None = None):
        """v . N at x1 = 0 for one slice: U0_trace (n2, n3, 5), phi (n2, n3)."""
        g = grid or self.grid
        v = self.model.velocity(U0_trace + self.profile.field(0.0))
        d2 = spectral_derivative(phi, g.L2, 0)
        d3 = spectral_derivative(phi, g.L3, 1)
        return v[..., 0] - v[..., 1] * d2 - v[..., 2] * d3
