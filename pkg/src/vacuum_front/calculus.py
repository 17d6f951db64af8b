"""Discrete Sobolev calculus on the slab: norms, smoothing operators, the
theta schedule and the boundary-to-interior lifting.

Field layouts follow :mod:`vacuum_front.grid`. Any trailing axes beyond the
grid axes (e.g. the 5 components) are summed over in norms and carried through
unchanged by the linear operators.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft as sfft
from scipy.special import roots_legendre

from .errors import ParameterError, ResolutionError
from .grid import TWO_PI, Grid

S_CAP = 8


# -- helpers -----------------------------------------------------------------

def _tangential_k2(grid: Grid) -> np.ndarray:
    k2 = np.fft.fftfreq(grid.n2, d=grid.L2 / grid.n2) * TWO_PI
    k3 = np.fft.fftfreq(grid.n3, d=grid.L3 / grid.n3) * TWO_PI
    return k2[:, None] ** 2 + k3[None, :] ** 2


def _expand(arr, ndim, axes):
    """Reshape ``arr`` so its dims sit at ``axes`` of an ``ndim`` array."""
    shape = [1] * ndim
    for a, n in zip(axes, arr.shape):
        shape[a] = n
    return arr.reshape(shape)


def _lambda_power(f, grid: Grid, m: float, tan_axes: tuple[int, int]):
    """Apply (1 + |k'|^2)^(m/2) along the tangential axes."""
    if m == 0:
        return f
    mult = _expand((1.0 + _tangential_k2(grid)) ** (m / 2.0), f.ndim, tan_axes)
    out = np.fft.ifft2(np.fft.fft2(f, axes=tan_axes) * mult, axes=tan_axes)
    return out if np.iscomplexobj(f) else out.real


def _fd(f, h, axis, order):
    for _ in range(order):
        f = np.gradient(f, h, axis=axis, edge_order=2)
    return f


def _weighted_sq(f, w):
    w = w.reshape(w.shape + (1,) * (f.ndim - w.ndim))
    return float(np.sum(w * np.abs(f) ** 2))


def _check_order(s):
    if s < 0 or int(s) != s:
        raise ParameterError(f"Sobolev order must be a non-negative integer, got {s}", module="calculus")
    if s > S_CAP:
        raise ResolutionError(f"order s={s} exceeds the resolution cap {S_CAP}", module="calculus",
                              operation="sobolev_norm")


# -- norms -------------------------------------------------------------------

def sobolev_norm(f, grid: Grid, s: int, surface: str = "interior") -> float:
    """Discrete H^s norm: sum over a+b <= s of |Lambda'^(s-a-b) D_t^a D_1^b f|^2.

    ``surface='boundary'`` expects fields of shape (nt, n2, n3, ...) and drops
    the x1 derivatives.
    """
    _check_order(s)
    f = np.asarray(f)
    if surface == "interior":
        w, tan, nx = grid.weights(), (2, 3), True
    elif surface == "boundary":
        w, tan, nx = grid.boundary_weights(), (1, 2), False
    else:
        raise ParameterError(f"unknown surface '{surface}'", module="calculus")
    total = 0.0
    ft = f
    for a in range(s + 1):
        fb = ft
        for b in range(s - a + 1 if nx else 1):
            total += _weighted_sq(_lambda_power(fb, grid, s - a - b, tan), w)
            if nx:
                fb = _fd(fb, grid.h1, 1, 1)
        ft = _fd(ft, grid.dt, 0, 1)
    return float(np.sqrt(total))


def l2_norm(f, grid: Grid, surface: str = "interior") -> float:
    return sobolev_norm(f, grid, 0, surface)


def tangential_norm(f, grid: Grid, s: int) -> float:
    """Only t and x' derivatives: sum over a <= s of |Lambda'^(s-a) D_t^a f|^2."""
    _check_order(s)
    f = np.asarray(f)
    w = grid.weights()
    total, ft = 0.0, f
    for a in range(s + 1):
        total += _weighted_sq(_lambda_power(ft, grid, s - a, (2, 3)), w)
        ft = _fd(ft, grid.dt, 0, 1)
    return float(np.sqrt(total))


def layerwise_norm(f, grid: Grid, k: int, s: int) -> float:
    """Fixed-time norm at node k: sum over j of |D_t^j f(t_k)|^2 in H^(s-j)."""
    _check_order(s)
    f = np.asarray(f)
    w = grid.space_weights()
    total, ft = 0.0, f
    for j in range(s + 1):
        fb = ft[k]
        for b in range(s - j + 1):
            total += _weighted_sq(_lambda_power(fb, grid, s - j - b, (1, 2)), w)
            fb = _fd(fb, grid.h1, 0, 1)
        ft = _fd(ft, grid.dt, 0, 1)
    return float(np.sqrt(total))


def sup_norm(f) -> float:
    return float(np.max(np.abs(f))) if np.size(f) else 0.0


def moser_check(u, v, grid: Grid, s: int) -> float:
    """Smallest C with |uv|_s <= C(|u|_s |v|_inf + |u|_inf |v|_s) for this pair."""
    lhs = sobolev_norm(np.asarray(u) * np.asarray(v), grid, s)
    rhs = sobolev_norm(u, grid, s) * sup_norm(v) + sup_norm(u) * sobolev_norm(v, grid, s)
    if rhs == 0.0:
        return 0.0
    return lhs / rhs


# -- theta schedule ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ThetaSchedule:
    theta0: float
    theta: np.ndarray
    delta: np.ndarray

    def bracket_holds(self) -> bool:
        th = self.theta
        return bool(np.all(1.0 / (3.0 * th) <= self.delta) and np.all(self.delta <= 1.0 / (2.0 * th)))


def theta_schedule(theta0: float, n_max: int) -> ThetaSchedule:
    """theta_n = sqrt(theta0 + n) for n = 0..n_max and Delta_n = theta_{n+1} - theta_n."""
    if theta0 < 1:
        raise ParameterError("theta0 must be >= 1", module="calculus", operation="theta_schedule")
    n = np.arange(n_max + 2, dtype=float)
    theta = np.sqrt(theta0 + n)
    delta = 1.0 / (theta[1:] + theta[:-1])  # cancellation-free difference
    return ThetaSchedule(float(theta0), theta[:-1], delta)


# -- smoothing ---------------------------------------------------------------

def _psi(x):
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def low_pass_symbol(r):
    """Smooth symbol: 1 on [0, 1], 0 on [2, inf)."""
    r = np.asarray(r, dtype=float)
    a, b = _psi(2.0 - r), _psi(r - 1.0)
    return a / (a + b)


@lru_cache(maxsize=8)
def _time_kernel_profile(order: int):
    """Polynomial P of degree ``order`` making P*b have moments (1, 0, ..., 0)."""
    xs, ws = roots_legendre(200)
    s = 0.5 * (xs + 1.0)
    ws = 0.5 * ws
    b = np.exp(-1.0 / (s * (1.0 - s)))
    V = np.vander(s, order + 1, increasing=True)
    M = (V * (b * ws)[:, None]).T @ V
    rhs = np.zeros(order + 1)
    rhs[0] = 1.0
    return np.linalg.solve(M, rhs)


KERNEL_ORDER = 2


def time_kernel(tau, width, order: int = KERNEL_ORDER):
    """Causal mollifier supported in (0, width), integral 1, moments 1..order zero."""
    coeffs = _time_kernel_profile(order)
    s = np.asarray(tau, dtype=float) / width
    inside = (s > 0) & (s < 1)
    out = np.zeros_like(s)
    si = s[inside]
    out[inside] = np.polyval(coeffs[::-1], si) * np.exp(-1.0 / (si * (1.0 - si))) / width
    return out


def time_weights(width: float, dt: float, order: int = KERNEL_ORDER) -> np.ndarray:
    """Discrete causal weights w_j = int k(tau) hat_j(tau) dtau, then projected
    so that sum_j j^m w_j = delta_m0 holds exactly for m <= order."""
    nj = int(np.ceil(width / dt)) + 1
    if width <= dt or nj <= order + 1:
        return np.array([1.0])
    xs, ws = roots_legendre(64)
    w = np.zeros(nj)
    for m in range(nj - 1):
        # on [m dt, (m+1) dt] the hats m and m+1 overlap
        tau = m * dt + 0.5 * dt * (xs + 1.0)
        kw = time_kernel(tau, width, order) * ws * 0.5 * dt
        frac = (tau - m * dt) / dt
        w[m] += np.sum(kw * (1.0 - frac))
        w[m + 1] += np.sum(kw * frac)
    j = np.arange(nj, dtype=float)
    A = np.vstack([j**m for m in range(order + 1)])
    e = np.zeros(order + 1)
    e[0] = 1.0
    return w - A.T @ np.linalg.solve(A @ A.T, A @ w - e)


def causal_convolve(f, w, axis=0):
    if w.size == 1 and w[0] == 1.0:
        return np.array(f, copy=True)
    f = np.moveaxis(np.asarray(f), axis, 0)
    out = np.zeros_like(f)
    for j, wj in enumerate(w):
        if j >= f.shape[0]:
            break
        if j == 0:
            out += wj * f
        else:
            out[j:] += wj * f[:-j]
    return np.moveaxis(out, 0, axis)


class Smoother:
    """Smoothing family S_theta on a grid.

    Space: radial symbol sigma(|k| / (kappa*theta)) over the cosine basis in x1
    (even reflection) and Fourier in x'. Time: causal mollifier of width
    ~ dt*theta_identity/theta, so past-vanishing fields stay past-vanishing.
    For theta >= theta_identity the operator is exactly the identity.
    """

    def __init__(self, grid: Grid, theta_identity: float = 64.0, smooth_x1: bool = True,
                 time_fraction: float = 0.125, kernel_order: int = KERNEL_ORDER):
        if theta_identity < 1:
            raise ParameterError("theta_identity must be >= 1", module="calculus")
        self.grid = grid
        self.theta_identity = float(theta_identity)
        self.smooth_x1 = smooth_x1
        self.time_fraction = time_fraction
        self.kernel_order = kernel_order

    @cached_property
    def _k1(self):
        g = self.grid
        return np.pi * np.arange(g.n1) / g.X1 if self.smooth_x1 else np.zeros(g.n1)

    @cached_property
    def _kt2(self):
        return _tangential_k2(self.grid)

    @cached_property
    def kappa(self) -> float:
        kmax = np.sqrt(self._k1.max() ** 2 + self._kt2.max())
        return max(kmax, 1e-300) / self.theta_identity

    def _check(self, theta):
        if theta < 1:
            raise ParameterError(f"theta must be >= 1, got {theta}", module="calculus",
                                 operation="apply_smoothing")

    def is_identity(self, theta) -> bool:
        return theta >= self.theta_identity

    def width(self, theta) -> float:
        return 0.999 * self.time_fraction * self.grid.dt * self.theta_identity / theta

    def weights(self, theta) -> np.ndarray:
        return time_weights(self.width(theta), self.grid.dt, self.kernel_order)

    def _space(self, f, theta, boundary):
        g = self.grid
        if boundary:
            r = np.sqrt(self._kt2) / (self.kappa * theta)
            sig = _expand(low_pass_symbol(r), f.ndim, (1, 2))
            out = np.fft.ifft2(np.fft.fft2(f, axes=(1, 2)) * sig, axes=(1, 2))
        else:
            r = np.sqrt(self._k1[:, None, None] ** 2 + self._kt2[None]) / (self.kappa * theta)
            sig = _expand(low_pass_symbol(r), f.ndim, (1, 2, 3))
            fh = np.fft.fft2(f, axes=(2, 3))
            if self.smooth_x1 and g.n1 > 1:
                fh = sfft.dct(fh, type=1, axis=1)
                fh = sfft.idct(fh * sig, type=1, axis=1)
            else:
                fh = fh * sig
            out = np.fft.ifft2(fh, axes=(2, 3))
        return out if np.iscomplexobj(f) else out.real

    def apply(self, f, theta: float, surface: str = "interior"):
        self._check(theta)
        f = np.asarray(f)
        if self.is_identity(theta):
            return np.array(f, copy=True)
        out = self._space(f, theta, surface == "boundary")
        out = causal_convolve(out, self.weights(theta), axis=0)
        out[self.grid.past] = 0.0
        return out


def apply_smoothing(f, theta: float, grid: Grid, theta_identity: float = 64.0,
                    surface: str = "interior"):
    return Smoother(grid, theta_identity).apply(f, theta, surface)


# -- lifting -----------------------------------------------------------------

def lifting_operator(g, grid: Grid, decay: float | None = None):
    """Extend boundary data g(t, x') into the slab with trace g at x1 = 0.

    Each tangential mode decays like exp(-sqrt(lam^2 + |k'|^2) x1), which gains
    one derivative mode-uniformly; time is untouched, so past-vanishing data
    gives a past-vanishing field.
    """
    g = np.asarray(g)
    lam = 10.0 / grid.X1 if decay is None else decay
    rate = np.sqrt(lam**2 + _tangential_k2(grid))  # (n2, n3)
    prof = np.exp(-grid.x1[:, None, None] * rate[None])  # (n1, n2, n3)
    gh = np.fft.fft2(g, axes=(1, 2))
    extra = g.ndim - 3
    prof = prof.reshape((1,) + prof.shape + (1,) * extra)
    out = np.fft.ifft2(gh[:, None] * prof, axes=(2, 3))
    out = out if np.iscomplexobj(g) else out.real
    out[:, 0] = g  # exact trace
    return out


# -- smoothing audit ---------------------------------------------------------

AUDIT_THETAS = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)


def audit_grid(scale: float = 1.0) -> Grid:
    """Reference audit grid: 64^3 space-time points, x1 in [0, pi]."""
    n = max(16, int(round(64 * scale)))
    return Grid(nt=n, n1=n, n2=n, n3=1, T=1.0, X1=np.pi, ghost=4)


def power_law_corpus(grid: Grid, count: int, decay: float, rng: np.random.Generator):
    """Random past-vanishing fields with spectrum (1+|k|^2)^(-decay/2) in space."""
    k1 = np.pi * np.arange(grid.n1) / grid.X1
    k2 = np.fft.fftfreq(grid.n2, d=grid.L2 / grid.n2) * TWO_PI
    amp = (1.0 + k1[:, None] ** 2 + k2[None, :] ** 2) ** (-decay / 2.0)
    t = grid.t
    tt = np.clip(t / grid.T, 0.0, None)
    eta = _psi(tt) / (_psi(tt) + _psi(1.0 - tt) + 1e-300) * (t > 0)
    out = []
    for _ in range(count):
        coef = amp * (rng.standard_normal(amp.shape) + 1j * rng.standard_normal(amp.shape))
        spatial = np.fft.ifft(coef, axis=1)
        spatial = sfft.idct(spatial.real, type=1, axis=0)
        omega, phase = rng.uniform(1.0, 3.0), rng.uniform(0, TWO_PI)
        prof = eta * (1.0 + 0.5 * np.sin(omega * t + phase))
        u = prof[:, None, None] * spatial[None]
        out.append(u[..., None])
    return out


@dataclass
class SmoothingAudit:
    thetas: np.ndarray
    ratios: dict  # property -> array over theta (max over corpus)
    slopes: dict
    constants: dict  # property -> array of C(theta)
    growth: dict  # property -> max C over all theta / max C over the lower half; bounded means uniform


def _loglog_slope(thetas, values):
    th, v = np.asarray(thetas), np.asarray(values)
    good = v > 0
    if good.sum() < 2:
        return float("-inf")
    return float(np.polyfit(np.log(th[good]), np.log(v[good]), 1)[0])


def constant_growth(constants) -> float:
    """max C over all theta / max C over the lower half of the theta range.

    Comparing against the whole lower half keeps one low sample (few modes in
    the transition band at small theta) from being read as growth.
    """
    c = np.asarray(constants, dtype=float)
    base = np.max(c[:max(1, len(c) // 2)])
    return float(np.max(c) / base) if base > 0 else float("inf")


def measure_smoothing_properties(corpus, grid: Grid, alpha: int, beta: int,
                                 thetas=AUDIT_THETAS, theta_identity: float = 64.0,
                                 rel_step: float = 0.05) -> SmoothingAudit:
    """Fit the theta-exponents of the three smoothing inequalities.

    p72: |S u|_beta / |u|_alpha        vs theta^(beta-alpha)_+
    p73: |S u - u|_beta / |u|_alpha    vs theta^(beta-alpha)   (beta <= alpha)
    p74: |dS/dtheta u|_beta / |u|_alpha vs theta^(beta-alpha-1)
    """
    if not corpus:
        raise ParameterError("empty corpus", module="calculus", operation="measure_smoothing_properties")
    _check_order(max(alpha, beta))
    sm = Smoother(grid, theta_identity)
    thetas = np.asarray(thetas, dtype=float)
    r72 = np.zeros(len(thetas))
    r73 = np.zeros(len(thetas))
    r74 = np.zeros(len(thetas))
    for u in corpus:
        ua = sobolev_norm(u, grid, alpha)
        if ua == 0:
            continue
        for i, th in enumerate(thetas):
            su = sm.apply(u, th)
            r72[i] = max(r72[i], sobolev_norm(su, grid, beta) / ua)
            if beta <= alpha:
                r73[i] = max(r73[i], sobolev_norm(su - u, grid, beta) / ua)
            hi = th * (1.0 + rel_step)
            if th * (1.0 - rel_step) < 1.0:
                # theta cannot go below 1: second-order one-sided difference
                h = hi - th
                ds = (4.0 * sm.apply(u, hi) - 3.0 * su - sm.apply(u, th + 2 * h)) / (2 * h)
            else:
                lo = th * (1.0 - rel_step)
                ds = (sm.apply(u, hi) - sm.apply(u, lo)) / (hi - lo)
            r74[i] = max(r74[i], sobolev_norm(ds, grid, beta) / ua)
    expo = {"p72": max(beta - alpha, 0), "p73": beta - alpha, "p74": beta - alpha - 1}
    ratios = {"p72": r72, "p73": r73, "p74": r74}
    if beta > alpha:
        del ratios["p73"], expo["p73"]
    slopes = {k: _loglog_slope(thetas, v) for k, v in ratios.items()}
    consts = {k: v / thetas ** expo[k] for k, v in ratios.items()}
    growth = {k: constant_growth(c) for k, c in consts.items()}
    return SmoothingAudit(thetas, ratios, slopes, consts, growth)
