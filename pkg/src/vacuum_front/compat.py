"""Time-derivative traces of the initial data, compatibility conditions,
the approximate solution and the forcing that makes the problem
past-vanishing.

Traces are generated in Taylor mode: with the coefficients known up to order
j, the semi-discrete evolution laws

    d_t phi = v . N (at x1 = 0),      d_t U = -A0^{-1} (A1~ (D_1 U + d1 U_check) + A2 D_2 U + A3 D_3 U + Q)

are evaluated on a small circle of complex times and the order-j Taylor
coefficient of each right-hand side is read off by an FFT. This gives the
exact time derivatives of the spatially discretized system without
hand-expanded Leibniz formulas.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .calculus import sobolev_norm
from .errors import AdmissibilityError, CompatibilityError, RegularityError
from .geometry import lift_slice
from .grid import Grid
from .problem import ROUNDOFF_FLUSH, FreeBoundaryProblem

N_CIRCLE = 32


@dataclass
class TraceStack:
    U: list  # U_j = d_t^j U |_{t=0}, each (n1, n2, n3, 5)
    phi: list  # phi_j, each (n2, n3)
    budget: int
    radius: float = 0.0

    @property
    def order(self) -> int:
        return len(self.U) - 1

    def Psi(self, chi, grid: Grid):
        c = chi(grid.x1)[:, None, None]
        return [c * p[None] for p in self.phi]


def _circle_radius(problem: FreeBoundaryProblem, U0) -> float:
    g = problem.grid
    kmax = np.pi / g.h1 + np.sqrt((np.pi * g.n2 / g.L2) ** 2 + (np.pi * g.n3 / g.L3) ** 2 * (g.n3 > 1))
    rp = np.real(problem.model.eos.rho_p(U0[..., 0] + 2 * problem.profile.eps * g.x1[:, None, None],
                                          U0[..., 4]))
    c = float(np.max(1.0 / np.sqrt(rp))) + float(np.max(np.abs(np.real(U0[..., 1:4]))))
    return 0.5 / (max(c, 1e-12) * kmax)


def _taylor_coeff(values, n, radius):
    """Coefficient of t^n from samples on the circle |t| = radius (axis 0)."""
    K = values.shape[0]
    m = np.arange(K)
    w = np.exp(-2j * np.pi * m * n / K)
    shape = (K,) + (1,) * (values.ndim - 1)
    return np.sum(values * w.reshape(shape), axis=0) / K / radius**n


def compute_traces(problem: FreeBoundaryProblem, U0, phi0, mu: int, budget: int | None = None,
                   n_circle: int = N_CIRCLE) -> TraceStack:
    """Traces U_j, phi_j for j = 0..mu of the semi-discrete free-boundary system."""
    g = problem.grid
    budget = mu if budget is None else budget
    if mu > budget:
        raise RegularityError(f"requested level {mu} exceeds the regularity budget {budget}",
                              module="compat", operation="compute_traces")
    U0 = np.asarray(U0, dtype=float)
    phi0 = np.asarray(phi0, dtype=float)
    ok, margin = problem.model.admissibility(U0 + problem.profile.field(g.x1)[:, None, None, :])
    if not np.all(ok):
        raise AdmissibilityError("initial data violate hyperbolicity", module="compat",
                                 operation="compute_traces",
                                 location=tuple(int(i) for i in np.argwhere(~ok)[0]))
    r = _circle_radius(problem, U0)
    tm = r * np.exp(2j * np.pi * np.arange(n_circle) / n_circle)
    a = [U0.astype(complex)]  # Taylor coefficients U_j / j!
    b = [phi0.astype(complex)]
    for j in range(mu):
        # front: (j+1) b_{j+1} = [v . N]_j
        vals = []
        for t in tm:
            U = sum(c * t**i for i, c in enumerate(a))
            ph = sum(c * t**i for i, c in enumerate(b))
            vals.append(problem.front_speed(U[0], ph))
        b.append(_taylor_coeff(np.array(vals), j, r) / (j + 1))
        # interior: (j+1) a_{j+1} = [F]_j
        vals = []
        for t in tm:
            U = sum(c * t**i for i, c in enumerate(a))
            ph = sum(c * t**i for i, c in enumerate(b[:j + 1]))
            pht = sum((i + 1) * c * t**i for i, c in enumerate(b[1:]))
            geom = lift_slice(ph, pht, problem.chi, g)
            vals.append(problem.slice_time_derivative(U, geom, flush=True))
        a.append(_taylor_coeff(np.array(vals), j, r) / (j + 1))
    Us = [np.real(c) * factorial(j) for j, c in enumerate(a)]
    phis = [np.real(c) * factorial(j) for j, c in enumerate(b)]
    return TraceStack(Us, phis, budget - mu, r)


@dataclass
class CompatibilityReport:
    residuals: list
    tol: float
    passed: bool
    failing_level: int | None = None

    def rows(self):
        return [{"level": j, "residual": r, "pass": r <= self.tol} for j, r in enumerate(self.residuals)]


def check_compatibility(stack: TraceStack, mu: int | None = None, tol: float = 1e-10) -> CompatibilityReport:
    """max over x' of |p_j| at x1 = 0 for j = 0..mu."""
    mu = stack.order if mu is None else mu
    res = [float(np.max(np.abs(stack.U[j][0, ..., 0]))) for j in range(mu + 1)]
    bad = [j for j, r in enumerate(res) if r > tol]
    return CompatibilityReport(res, tol, not bad, bad[0] if bad else None)


def enforce_first_order(problem: FreeBoundaryProblem, U0, phi0, profile_width: float = 0.3,
                        tol: float = 1e-6, max_newton: int = 5):
    """Adjust v1 by beta(x') x1 zeta(x1) until the level-1 pressure trace is below ``tol``.

    Level 1 of the trace recursion is affine in beta at each boundary node, so
    Newton with a complex-step diagonal Jacobian converges in one or two steps.
    Returns (U0_new, beta, residual).
    """
    g = problem.grid
    x1 = g.x1
    zeta = np.exp(-(x1 / profile_width) ** 2)
    shape_fn = (x1 * zeta)[:, None, None]
    beta = np.zeros((g.n2, g.n3))

    def level1(bc):
        U = np.asarray(U0, dtype=complex).copy()
        U[..., 1] = U[..., 1] + bc[None] * shape_fn
        geom = lift_slice(np.asarray(phi0, dtype=complex),
                          problem.front_speed(U[0], np.asarray(phi0, dtype=complex)), problem.chi, g)
        return problem.slice_time_derivative(U, geom)[0, ..., 0]

    res = float(np.max(np.abs(np.real(level1(beta)))))
    for _ in range(max_newton):
        if res <= tol:
            break
        h = 1e-30
        val = level1(beta.astype(complex))
        jac = np.imag(level1(beta + 1j * h)) / h
        if np.any(jac == 0):
            break
        beta = beta - np.real(val) / jac
        res = float(np.max(np.abs(np.real(level1(beta)))))
    U = np.array(U0, dtype=float, copy=True)
    U[..., 1] += beta[None] * shape_fn
    return U, beta, res


# -- approximate solution ---------------------------------------------------------

def time_cutoff(t, window):
    """Smooth eta with eta = 1 on [-window/2, window/2] and 0 outside [-window, window]."""
    s = np.clip((np.abs(t) - 0.5 * window) / (0.5 * window), 0.0, 1.0)

    def psi(x):
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(-1.0 / x[pos])
        return out

    return psi(1.0 - s) / (psi(1.0 - s) + psi(s))


@dataclass
class ApproximateSolution:
    U: np.ndarray  # (nt, n1, n2, n3, 5) shifted
    phi: np.ndarray  # (nt, n2, n3)
    stack: TraceStack
    window: float
    extras: dict = field(default_factory=dict)


def build_approximate_solution(stack: TraceStack, grid: Grid, window: float | None = None,
                               tol: float = 1e-10, require_compatible: bool = True) -> ApproximateSolution:
    """U^a = U_0 + eta(t) sum_{j>=1} U_j t^j / j!, likewise phi^a."""
    if require_compatible:
        rep = check_compatibility(stack, tol=tol)
        if not rep.passed:
            raise CompatibilityError(f"data incompatible at level {rep.failing_level} "
                                     f"(residual {rep.residuals[rep.failing_level]:.3e})",
                                     module="compat", operation="build_approximate_solution",
                                     location=rep.failing_level)
    window = 2.0 * grid.T if window is None else window
    t = grid.t
    eta = time_cutoff(t, window)
    U = np.broadcast_to(stack.U[0], grid.shape[:1] + stack.U[0].shape).copy()
    phi = np.broadcast_to(stack.phi[0], grid.shape[:1] + stack.phi[0].shape).copy()
    for j in range(1, stack.order + 1):
        c = eta * t**j / factorial(j)
        U += c[:, None, None, None, None] * stack.U[j][None]
        phi += c[:, None, None] * stack.phi[j][None]
    return ApproximateSolution(U, phi, stack, window)


def taylor_residuals(problem: FreeBoundaryProblem, stack: TraceStack, orders: int | None = None,
                     n_circle: int = N_CIRCLE):
    """L2 norms of d_t^j (A0 d_t U + A1~ ... + Q)|_{t=0} for the Taylor lift, j < mu."""
    g = problem.grid
    mu = stack.order
    orders = mu if orders is None else orders
    r = stack.radius
    tm = r * np.exp(2j * np.pi * np.arange(n_circle) / n_circle)
    a = [u / factorial(j) for j, u in enumerate(stack.U)]
    b = [p / factorial(j) for j, p in enumerate(stack.phi)]
    vals = []
    for t in tm:
        U = sum(c * t**i for i, c in enumerate(a))
        Ut = sum((i + 1) * c * t**i for i, c in enumerate(a[1:]))
        ph = sum(c * t**i for i, c in enumerate(b))
        pht = sum((i + 1) * c * t**i for i, c in enumerate(b[1:]))
        geom = lift_slice(ph, pht, problem.chi, g)
        A0, G = problem.slice_rhs(U, geom)
        vals.append(np.einsum("...ij,...j->...i", A0, Ut) + G)
    vals = np.array(vals)
    w = g.space_weights()[..., None]
    out = []
    for j in range(orders):
        c = _taylor_coeff(vals, j, r) * factorial(j)
        out.append(float(np.sqrt(np.sum(w * np.abs(c) ** 2))))
    return out


def compute_forcing(problem: FreeBoundaryProblem, approx: ApproximateSolution):
    """f^a = -L_h(U^a, phi^a) and g^a = -B_h(U^a, phi^a) for t > 0, zero in the past.

    Entries below the rounding bound of their summands are flushed to zero.
    """
    g = problem.grid
    fa = -problem.operator(approx.U, approx.phi)
    bound = problem.operator_bound(approx.U, approx.phi)
    fa = np.where(np.abs(fa) <= ROUNDOFF_FLUSH * np.finfo(float).eps * bound, 0.0, fa)
    ga = -problem.boundary_operator(approx.U, approx.phi)
    fa[g.past] = 0.0
    ga[g.past] = 0.0
    return np.real(fa), np.real(ga)


def forcing_vs_horizon(problem_factory, U0, phi0, mu: int, horizons, s: int = 3):
    """H^s norm of f^a on nested horizons; problem_factory(T) -> FreeBoundaryProblem."""
    out = []
    for T in horizons:
        prob = problem_factory(T)
        stack = compute_traces(prob, U0, phi0, mu)
        approx = build_approximate_solution(stack, prob.grid, require_compatible=False)
        prob = prob.with_far_field(approx.U, approx.phi)
        fa, _ = compute_forcing(prob, approx)
        out.append(sobolev_norm(fa, prob.grid, s))
    return out


# -- one-step oracle -----------------------------------------------------------------

def one_step_oracle(problem: FreeBoundaryProblem, U0, phi0, dt: float):
    """Advance the nonlinear semi-discrete system by one RK4 step of size dt and
    return the divided differences ((U(dt) - U0)/dt, (phi(dt) - phi0)/dt)."""
    g = problem.grid

    def rate(U, ph):
        pht = problem.front_speed(U[0], ph)
        geom = lift_slice(ph, pht, problem.chi, g)
        return problem.slice_time_derivative(U, geom), pht

    U0 = np.asarray(U0, dtype=float)
    phi0 = np.asarray(phi0, dtype=float)
    k1u, k1p = rate(U0, phi0)
    k2u, k2p = rate(U0 + 0.5 * dt * k1u, phi0 + 0.5 * dt * k1p)
    k3u, k3p = rate(U0 + 0.5 * dt * k2u, phi0 + 0.5 * dt * k2p)
    k4u, k4p = rate(U0 + dt * k3u, phi0 + dt * k3p)
    U1 = U0 + dt / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
    p1 = phi0 + dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
    return (U1 - U0) / dt, (p1 - phi0) / dt
