"""Space-time grid on the straightened slab and its discrete derivatives.

Layout conventions used throughout the package:

* space-time scalar fields have shape ``(nt, n1, n2, n3)``; vector fields add a
  trailing component axis, e.g. ``(nt, n1, n2, n3, 5)`` for the fluid unknown;
* spatial fields drop the leading time axis;
* boundary fields (the front, boundary data) have shape ``(nt, n2, n3)``.

``n3 == 1`` means a single tangential direction (d = 1). The time axis starts
with ``ghost`` nodes at t < 0 so that fields vanishing in the past can be
represented exactly and causal stencils never leave the grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ParameterError

TWO_PI = 2.0 * np.pi


@lru_cache(maxsize=32)
def sbp42(n: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal-norm summation-by-parts first derivative, 4th order inside and
    2nd order at the two boundary blocks. Returns ``(D, Hdiag)``."""
    if n < 8:
        raise ParameterError(f"SBP operator needs at least 8 nodes in x1, got {n}")
    D = np.zeros((n, n))
    for i in range(4, n - 4):
        D[i, i - 2:i + 3] = [1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12]
    block = np.array([
        [-24 / 17, 59 / 34, -4 / 17, -3 / 34, 0.0, 0.0],
        [-1 / 2, 0.0, 1 / 2, 0.0, 0.0, 0.0],
        [4 / 43, -59 / 86, 0.0, 59 / 86, -4 / 43, 0.0],
        [3 / 98, 0.0, -59 / 98, 0.0, 32 / 49, -4 / 49],
    ])
    D[:4, :6] = block
    D[n - 4:, n - 6:] = -block[::-1, ::-1]
    H = np.ones(n)
    H[:4] = [17 / 48, 59 / 48, 43 / 48, 49 / 48]
    H[n - 4:] = H[:4][::-1]
    D /= h
    H *= h
    D.setflags(write=False)
    H.setflags(write=False)
    return D, H


@lru_cache(maxsize=64)
def wavenumbers(n: int, length: float) -> np.ndarray:
    k = np.fft.fftfreq(n, d=length / n) * TWO_PI
    if n % 2 == 0:
        k[n // 2] = 0.0  # drop the unpaired Nyquist mode for odd derivatives
    k.setflags(write=False)
    return k


@lru_cache(maxsize=64)
def spectral_matrix(n: int, length: float) -> np.ndarray:
    """Dense periodic differentiation matrix equal to the FFT derivative."""
    if n == 1:
        return np.zeros((1, 1))
    eye = np.eye(n)
    D = np.real(np.fft.ifft(1j * wavenumbers(n, length)[:, None] * np.fft.fft(eye, axis=0), axis=0))
    D.setflags(write=False)
    return D


def spectral_derivative(f: np.ndarray, length: float, axis: int, order: int = 1) -> np.ndarray:
    n = f.shape[axis]
    if n == 1:
        return np.zeros_like(f)
    k = np.fft.fftfreq(n, d=length / n) * TWO_PI
    if order % 2 == 1 and n % 2 == 0:
        k[n // 2] = 0.0
    shape = [1] * f.ndim
    shape[axis] = n
    mult = ((1j * k) ** order).reshape(shape)

    def real_op(a):
        return np.fft.ifft(mult * np.fft.fft(a, axis=axis), axis=axis).real

    if np.iscomplexobj(f):
        # the operator is real: keep the parts apart so complex steps survive
        return real_op(f.real) + 1j * real_op(f.imag)
    return real_op(f)


def apply_along(M: np.ndarray, f: np.ndarray, axis: int) -> np.ndarray:
    """Apply a dense matrix along one axis of ``f``."""
    out = np.tensordot(M, f, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def bdf2(f: np.ndarray, dt: float, axis: int = 0) -> np.ndarray:
    """Causal second-order backward difference; first-order on the first
    interval and a copy of it on the very first node."""
    f = np.moveaxis(f, axis, 0)
    d = np.empty_like(f)
    inc = np.diff(f, axis=0)
    d[1] = inc[0] / dt
    d[0] = d[1]
    d[2:] = (1.5 * inc[1:] - 0.5 * inc[:-1]) / dt
    return np.moveaxis(d, 0, axis)


def central(f: np.ndarray, dt: float, axis: int = 0) -> np.ndarray:
    return np.gradient(f, dt, axis=axis, edge_order=2)


@dataclass(frozen=True)
class Grid:
    """Uniform space-time grid: t with a ghost region, x1 in [0, X1],
    periodic x2 (length L2) and x3 (length L3, collapsed when n3 == 1)."""

    nt: int = 24
    n1: int = 33
    n2: int = 8
    n3: int = 1
    T: float = 0.4
    X1: float = 0.8
    L2: float = TWO_PI
    L3: float = TWO_PI
    ghost: int = 3

    def __post_init__(self):
        if self.nt - 1 - self.ghost < 1:
            raise ParameterError("time grid needs at least one step after t=0")
        if self.ghost < 2:
            raise ParameterError("ghost region needs at least 2 nodes")
        if self.n1 < 8 or self.n2 < 1 or self.n3 < 1:
            raise ParameterError("grid too small")
        if self.T <= 0 or self.X1 <= 0:
            raise ParameterError("T and X1 must be positive")

    # -- coordinates -------------------------------------------------------
    @property
    def d(self) -> int:
        return 1 if self.n3 == 1 else 2

    @property
    def dt(self) -> float:
        return self.T / (self.nt - 1 - self.ghost)

    @property
    def h1(self) -> float:
        return self.X1 / (self.n1 - 1)

    @property
    def t(self) -> np.ndarray:
        return (np.arange(self.nt) - self.ghost) * self.dt

    @property
    def x1(self) -> np.ndarray:
        return np.linspace(0.0, self.X1, self.n1)

    @property
    def x2(self) -> np.ndarray:
        return np.arange(self.n2) * (self.L2 / self.n2)

    @property
    def x3(self) -> np.ndarray:
        return np.arange(self.n3) * (self.L3 / self.n3)

    @property
    def shape(self) -> tuple:
        return (self.nt, self.n1, self.n2, self.n3)

    @property
    def space_shape(self) -> tuple:
        return (self.n1, self.n2, self.n3)

    @property
    def boundary_shape(self) -> tuple:
        return (self.nt, self.n2, self.n3)

    @property
    def past(self) -> np.ndarray:
        """Boolean mask of time nodes with t <= 0."""
        return np.arange(self.nt) <= self.ghost

    def mesh(self):
        """Broadcastable coordinate arrays (t, x1, x2, x3) of shape grid.shape."""
        return np.meshgrid(self.t, self.x1, self.x2, self.x3, indexing="ij")

    def space_mesh(self):
        return np.meshgrid(self.x1, self.x2, self.x3, indexing="ij")

    def boundary_mesh(self):
        return np.meshgrid(self.t, self.x2, self.x3, indexing="ij")

    def with_time(self, nt: int, T: float) -> "Grid":
        return Grid(nt, self.n1, self.n2, self.n3, T, self.X1, self.L2, self.L3, self.ghost)

    def refined(self, factor: int = 2) -> "Grid":
        """Refine time and x1 together (spectral directions are kept)."""
        steps = (self.nt - 1 - self.ghost) * factor
        return Grid(steps + 1 + self.ghost * factor, (self.n1 - 1) * factor + 1, self.n2, self.n3,
                    self.T, self.X1, self.L2, self.L3, self.ghost * factor)

    # -- operators ---------------------------------------------------------
    @property
    def D1(self) -> np.ndarray:
        return sbp42(self.n1, self.h1)[0]

    @property
    def H1(self) -> np.ndarray:
        return sbp42(self.n1, self.h1)[1]

    @property
    def D2(self) -> np.ndarray:
        return spectral_matrix(self.n2, self.L2)

    @property
    def D3(self) -> np.ndarray:
        return spectral_matrix(self.n3, self.L3)

    def dx1(self, f, axis=1):
        return apply_along(self.D1, f, axis)

    def dx2(self, f, axis=2):
        return spectral_derivative(f, self.L2, axis)

    def dx3(self, f, axis=3):
        return spectral_derivative(f, self.L3, axis)

    def dt_causal(self, f, axis=0):
        return bdf2(f, self.dt, axis)

    def dt_central(self, f, axis=0):
        return central(f, self.dt, axis)

    # -- quadrature --------------------------------------------------------
    @property
    def wt(self) -> np.ndarray:
        w = np.full(self.nt, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w

    @property
    def w_tangential(self) -> float:
        w = self.L2 / self.n2
        if self.n3 > 1:
            w *= self.L3 / self.n3
        return w

    def weights(self) -> np.ndarray:
        """Space-time quadrature weights (trapezoid in t, SBP norm in x1)."""
        return (self.wt[:, None, None, None] * self.H1[None, :, None, None]
                * self.w_tangential)

    def space_weights(self) -> np.ndarray:
        return self.H1[:, None, None] * self.w_tangential * np.ones(self.space_shape)

    def boundary_weights(self) -> np.ndarray:
        return self.wt[:, None, None] * self.w_tangential * np.ones(self.boundary_shape)

    def describe(self) -> dict:
        return {"nt": self.nt, "n1": self.n1, "n2": self.n2, "n3": self.n3, "T": self.T,
                "X1": self.X1, "L2": self.L2, "L3": self.L3, "ghost": self.ghost}
