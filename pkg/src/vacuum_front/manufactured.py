"""Closed-form states for manufactured-solution studies.

Fields are Python callables of broadcast coordinate arrays (t, x1, x2, x3)
built from analytic numpy functions; exact derivatives come from complex steps
in the coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import StraightenedGeometry
from .grid import Grid
from .linsolve import BasicState, LinearData, LinearizedProblem, validate_basic_state
from .problem import CSTEP, Derivatives, FreeBoundaryProblem, mv


def coord_derivative(fn, coords, axis, h=CSTEP):
    c = [np.asarray(x, dtype=complex) for x in coords]
    c[axis] = c[axis] + 1j * h
    return np.imag(fn(*c)) / h


def onset(t, power=4):
    """t^power for t > 0, zero in the past (complex-step safe)."""
    return np.where(np.real(t) > 0, t**power, 0.0 * t)


def basic_fields(amplitude: float = 1.0):
    """A time-independent basic state with phi_hat = 0 and v1 = 0 at x1 = 0."""

    def U(t, x1, x2, x3):
        a = amplitude
        p = a * 0.05 * x1**2 * (1.0 + 0.3 * np.cos(x2))
        v1 = a * 0.1 * x1 * np.sin(x2)
        v2 = a * (0.2 + 0.05 * np.cos(x2 + x3))
        v3 = a * 0.05 * np.sin(x3) + 0.0 * x1
        S = a * 0.1 * np.cos(x2) * np.exp(-x1)
        return np.stack(np.broadcast_arrays(p, v1, v2, v3, S + 0.0 * t), axis=-1)

    return U


def exact_fields(amplitude: float = 0.05):
    def U(t, x1, x2, x3):
        e = amplitude * onset(t)
        c = np.cos(np.pi * x1 / 1.6)
        p = e * (np.sin(x2) + 0.5 * x1) * c
        v1 = e * np.cos(x2 + x3) * (1.0 + x1)
        v2 = e * np.sin(2.0 * x1) * np.cos(x2)
        v3 = e * 0.5 * np.cos(x3 + x1)
        S = e * np.sin(x2 - x1)
        return np.stack(np.broadcast_arrays(p, v1, v2, v3, S), axis=-1)

    def phi(t, x2, x3):
        return amplitude * onset(t) * (0.5 * np.cos(x2) + 0.2 * np.sin(x3))

    return U, phi


def freeze_x3(fn, grid: Grid):
    """With one tangential direction the fields must not depend on x3."""
    if grid.n3 > 1:
        return fn
    return lambda *c: fn(*c[:-1], 0.0 * c[-1])


def sample_with_derivatives(fn, grid: Grid):
    fn = freeze_x3(fn, grid)
    T, X1, X2, X3 = grid.mesh()
    coords = (T, X1, X2, X3)
    val = np.real(fn(*coords))
    d = [coord_derivative(fn, coords, a) for a in range(4)]
    return val, Derivatives(*d)


@dataclass
class LinearMMS:
    basic: BasicState
    linear: LinearizedProblem
    data: LinearData
    U: np.ndarray
    phi: np.ndarray


def build_linear_mms(problem: FreeBoundaryProblem, basic_amp: float = 1.0,
                     exact_amp: float = 0.05) -> LinearMMS:
    """Basic state, data and exact solution for the effective linear problem."""
    g = problem.grid
    Ub_fn = basic_fields(basic_amp)
    Ub, dUb = sample_with_derivatives(Ub_fn, g)
    phib = np.zeros(g.boundary_shape)
    zeros = np.zeros(g.shape)
    geom = StraightenedGeometry(zeros, zeros, zeros, zeros, np.ones(g.shape))
    prob = problem.with_far_field(Ub, phib)
    basic = validate_basic_state(prob, Ub, phib, dU=dUb, geom=geom)
    lin = LinearizedProblem(basic)

    Ue_fn, phie_fn = exact_fields(exact_amp)
    phie_fn = freeze_x3(phie_fn, g)
    Ue, dUe = sample_with_derivatives(Ue_fn, g)
    Tb, X2b, X3b = g.boundary_mesh()
    bc = (Tb, X2b, X3b)
    phie = np.real(phie_fn(*bc))
    dphi = [coord_derivative(phie_fn, bc, a) for a in range(3)]

    f = (mv(lin.A0, dUe.t) + mv(lin.At, dUe.x1) + mv(lin.A2, dUe.x2) + mv(lin.A3, dUe.x3)
         + mv(lin.C, Ue))
    g1 = (dphi[0] + lin.v2b * dphi[1] + lin.v3b * dphi[2]
          - np.einsum("...i,...i->...", lin.JvN, Ue[:, 0]) - phie * lin.d1vN)
    g2 = Ue[:, 0, ..., 0] + phie * basic.a_hat
    # the far penalty acts on U_dot plus the phi part of the good unknown
    wX = problem.chi(g.X1) * phie / np.real(geom.d1Phi[:, -1])
    far = Ue[:, -1] + wX[..., None] * np.real(basic.d1_total[:, -1])
    data = LinearData(f, np.stack([g1, g2], axis=-1), far=far)
    return LinearMMS(basic, lin, data, Ue, phie)
