"""Nash-Moser iteration for the discrete free-boundary problem.

Unknowns are corrections (U, phi) to an approximate solution (U^a, phi^a).
With the shorthand

    calL(U, phi) = L_h(U^a + U, phi^a + phi) - L_h(U^a, phi^a)
    calB(U, phi) = B_h,1(U^a + U, phi^a + phi) - B_h,1(U^a, phi^a)

the target is calL = f^a, calB = g^a. The pressure condition p = 0 is part
of L_h through the boundary penalty, so only the kinematic row appears in
calB. Each step solves the effective linear problem in the good unknown
around a smoothed and corrected (modified) state, and the right-hand sides are
updated from the accumulated errors so that

    sum_{k<=n} f_k + S_n E_n = S_n f^a,     sum_{k<=n} g_k + S_n E~_n = S_n g^a

hold at every n.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .calculus import Smoother, sobolev_norm, theta_schedule
from .errors import (BasicStateViolation, DivergenceError, LiftViolation, ParameterError,
                     PhysicsError)
from .geometry import shift_unknown
from .grid import Grid, apply_along
from .linsolve import LinearData, LinearizedProblem, good_unknown_transform, validate_basic_state
from .problem import CSTEP, FreeBoundaryProblem

log = logging.getLogger(__name__)

S_CAP = 8


@dataclass(frozen=True)
class NashMoserConfig:
    alpha: int = 7
    delta: float = 0.1
    theta0: float = 1.0
    max_iter: int = 40
    tol: float = 1e-6  # relative to the initial interior residual
    s_max: int = 8
    theta_identity: float = 4.0
    patience: int = 3
    growth: float = 10.0
    max_halvings: int = 3
    telescoping_tol: float = 1e-10

    def __post_init__(self):
        if self.alpha < 7:
            raise ParameterError("alpha must be >= 7", module="nashmoser", operation="config")
        if self.theta0 < 1:
            raise ParameterError("theta0 must be >= 1", module="nashmoser", operation="config")

    @property
    def alpha_tilde(self) -> int:
        return self.alpha + 4

    @property
    def s_top(self) -> int:
        return min(self.alpha_tilde, self.s_max, S_CAP)


# -- the target problem --------------------------------------------------------------

@dataclass(eq=False)
class Approximation:
    """Approximate solution with the forcing it leaves behind."""

    problem: FreeBoundaryProblem  # far field fixed from (U^a, phi^a)
    U: np.ndarray
    phi: np.ndarray
    f: np.ndarray  # (nt, n1, n2, n3, 5)
    g: np.ndarray  # (nt, n2, n3), kinematic row
    exact: tuple | None = None  # known discrete solution (U*, phi*) when manufactured

    @property
    def grid(self) -> Grid:
        return self.problem.grid


class NonlinearMaps:
    """calL, calB and their directional derivatives around (U^a, phi^a)."""

    def __init__(self, approx: Approximation):
        self.approx = approx
        self.problem = approx.problem
        self._La = np.real(self.problem.operator(approx.U, approx.phi))
        self._Ba = np.real(self.problem.boundary_operator(approx.U, approx.phi)[..., 0])

    def L(self, U, phi):
        a = self.approx
        return np.real(self.problem.operator(a.U + U, a.phi + phi)) - self._La

    def B(self, U, phi):
        a = self.approx
        return np.real(self.problem.boundary_operator(a.U + U, a.phi + phi)[..., 0]) - self._Ba

    def dL(self, U, phi, dU, dphi):
        a = self.approx
        out = self.problem.operator(a.U + U + 1j * CSTEP * dU, a.phi + phi + 1j * CSTEP * dphi)
        return np.imag(out) / CSTEP

    def dB(self, U, phi, dU, dphi):
        a = self.approx
        out = self.problem.boundary_operator(a.U + U + 1j * CSTEP * dU, a.phi + phi + 1j * CSTEP * dphi)
        return np.imag(out[..., 0]) / CSTEP


def approximation_from_data(problem: FreeBoundaryProblem, U0, phi0, mu: int = 4,
                            require_compatible: bool = True) -> Approximation:
    from .compat import build_approximate_solution, compute_forcing, compute_traces

    stack = compute_traces(problem, U0, phi0, mu)
    approx = build_approximate_solution(stack, problem.grid, require_compatible=require_compatible)
    prob = problem.with_far_field(approx.U, approx.phi)
    fa, ga = compute_forcing(prob, approx)
    return Approximation(prob, approx.U, approx.phi, fa, ga[..., 0])


def onset(t, T):
    s = np.maximum(np.asarray(t, dtype=float), 0.0) / T
    return s**4


def manufactured_reference(problem: FreeBoundaryProblem, amplitude: float = 0.05) -> Approximation:
    """Rest state as U^a and a smooth exact correction (U*, phi*).

    The forcing is f^a = calL(U*, phi*), g^a = calB(U*, phi*), so the discrete
    problem has (U*, phi*) as its exact solution.
    """
    from .presets import rest_state

    g = problem.grid
    U0, phi0 = rest_state(problem)
    Ua = np.broadcast_to(U0, g.shape + (5,)).copy()
    phia = np.zeros(g.boundary_shape)
    prob = problem.with_far_field(Ua, phia)
    T, X1, X2, X3 = g.mesh()
    s = amplitude * onset(T, g.T)
    c = np.cos(0.5 * np.pi * X1 / g.X1)
    W = np.zeros(g.shape + (5,))
    W[..., 0] = s * X1 * c * (1.0 + 0.3 * np.cos(X2))
    v = np.stack([s * 0.5 * np.cos(X2) * c, s * 0.4 * np.sin(X2) * c, s * 0.2 * np.cos(X2 + X3) * c], -1)
    W[..., 1:4] = prob.model.velocity_to_state(v)
    W[..., 4] = s * 0.5 * np.sin(X2) * c
    Tb, X2b, X3b = g.boundary_mesh()
    phi = amplitude * onset(Tb, g.T) * 0.5 * np.cos(X2b)
    tmp = Approximation(prob, Ua, phia, np.zeros_like(W), np.zeros(g.boundary_shape))
    maps = NonlinearMaps(tmp)
    return Approximation(prob, Ua, phia, maps.L(W, phi), maps.B(W, phi), exact=(W, phi))


# -- iteration state ---------------------------------------------------------------

@dataclass
class ModifiedState:
    U: np.ndarray
    phi: np.ndarray
    U_smooth: np.ndarray
    phi_smooth: np.ndarray
    correction: np.ndarray  # boundary v1 (or u1) correction before lifting
    defect: float  # kinematic defect left after the correction


@dataclass
class IterationState:
    n: int
    U: np.ndarray
    phi: np.ndarray
    f: list  # f_0 .. f_n
    g: list
    E: np.ndarray  # sum_{k<n} e_k
    Et: np.ndarray
    e_hist: list = field(default_factory=list)
    et_hist: list = field(default_factory=list)
    dU_hist: list = field(default_factory=list)
    dphi_hist: list = field(default_factory=list)
    rows: list = field(default_factory=list)


@dataclass
class ErrorTerms:
    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray
    D: np.ndarray
    r: np.ndarray
    et1: np.ndarray
    et2: np.ndarray
    et3: np.ndarray
    Dt: np.ndarray
    rt: np.ndarray

    @property
    def e(self):
        return self.e1 + self.e2 + self.e3 + self.D + self.r

    @property
    def et(self):
        return self.et1 + self.et2 + self.et3 + self.Dt + self.rt


def modified_state(U_n, phi_n, theta: float, maps: NonlinearMaps, smoother: Smoother,
                   newton_steps: int = 4) -> ModifiedState:
    """Smooth every component and the front, then correct the normal velocity
    so that the kinematic row of the combined state matches that of U^a."""
    from .calculus import lifting_operator

    g = maps.problem.grid
    SU = smoother.apply(U_n, theta)
    Sphi = smoother.apply(phi_n, theta, "boundary")
    U = SU.copy()
    corr = np.zeros(g.boundary_shape)
    if np.any(U_n) or np.any(phi_n):
        e1 = np.zeros(g.shape + (5,))
        e1[:, 0, ..., 1] = 1.0
        for _ in range(newton_steps):
            defect = maps.B(U, Sphi)
            slope = maps.dB(U, Sphi, e1, np.zeros_like(Sphi))
            step = -defect / slope
            if not np.all(np.isfinite(step)):
                raise PhysicsError("kinematic correction failed", module="nashmoser",
                                   operation="modified_state")
            corr += step
            U = SU.copy()
            U[..., 1] += lifting_operator(corr, g)
            if np.max(np.abs(step)) < 1e-15:
                break
    res = float(np.max(np.abs(maps.B(U, Sphi)))) if corr.any() else 0.0
    return ModifiedState(U, Sphi, SU, Sphi, corr, res)


# -- monitor ---------------------------------------------------------------------

@dataclass
class HnReport:
    rows: list
    delta_min: dict
    monotone_from: int | None
    slope_b3: float | None

    def holds(self, delta: float) -> bool:
        return all(v <= delta for v in self.delta_min.values())


def _fit_slope(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (y > 0) & np.isfinite(y)
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def convergence_monitor(state: IterationState, cfg: NashMoserConfig, burn_in: int = 3) -> HnReport:
    rows, dmin = [], {"a": 0.0, "b": 0.0, "c": 0.0}
    sched = theta_schedule(cfg.theta0, max(len(state.rows), 1) + 1)
    a = cfg.alpha
    for row in state.rows:
        k = row["n"]
        th, De = sched.theta[k], sched.delta[k]
        for s in range(3, cfg.s_top + 1):
            q = row.get(f"step_H{s}")
            if q is not None:
                ratio = q / (th ** (s - a - 1) * De)
                rows.append({"n": k, "s": s, "point": "a", "value": q, "ratio": ratio})
                dmin["a"] = max(dmin["a"], ratio)
            if s <= cfg.alpha_tilde - 2:
                q = row[f"res_H{s}"]
                ratio = q / (2.0 * th ** (s - a - 1))
                rows.append({"n": k, "s": s, "point": "b", "value": q, "ratio": ratio})
                dmin["b"] = max(dmin["b"], ratio)
            if 4 <= s <= a:
                q = row[f"bres_H{s}"]
                ratio = q / th ** (s - a - 1)
                rows.append({"n": k, "s": s, "point": "c", "value": q, "ratio": ratio})
                dmin["c"] = max(dmin["c"], ratio)
    res = [r["res_H3"] for r in state.rows]
    mono = None
    for start in range(len(res)):
        if all(res[i + 1] < res[i] for i in range(start, len(res) - 1)):
            mono = start
            break
    ths = [sched.theta[r["n"]] for r in state.rows]
    slope = _fit_slope(ths[burn_in:], res[burn_in:]) if len(res) > burn_in + 1 else None
    return HnReport(rows, dmin, mono, slope)


# -- driver ---------------------------------------------------------------------------

@dataclass
class NashMoserResult:
    U: np.ndarray  # physical (unshifted) full solution
    phi: np.ndarray
    U_corr: np.ndarray
    phi_corr: np.ndarray
    iterations: int
    converged: bool
    rows: list
    monitor: HnReport | None
    T: float
    halvings: int
    max_telescoping: float
    max_decomposition: float
    max_incremental_gap: float


class NashMoserSolver:
    """One Nash-Moser run on a fixed approximation and grid."""

    def __init__(self, approx: Approximation, cfg: NashMoserConfig,
                 on_iterate: Callable | None = None):
        self.approx = approx
        self.cfg = cfg
        self.grid = approx.grid
        self.maps = NonlinearMaps(approx)
        self.smoother = Smoother(self.grid, theta_identity=cfg.theta_identity)
        self.sched = theta_schedule(cfg.theta0, cfg.max_iter + 1)
        self.on_iterate = on_iterate
        self.max_telescoping = 0.0
        self.max_decomposition = 0.0
        self.max_incremental_gap = 0.0

    # smoothing shorthands
    def S(self, f, n):
        return self.smoother.apply(f, float(self.sched.theta[n]))

    def Sb(self, f, n):
        return self.smoother.apply(f, float(self.sched.theta[n]), "boundary")

    def initial_state(self) -> IterationState:
        g, a = self.grid, self.approx
        z = np.zeros(g.shape + (5,))
        zb = np.zeros(g.boundary_shape)
        return IterationState(0, z, zb.copy(), [self.S(a.f, 0)], [self.Sb(a.g, 0)], z.copy(), zb.copy())

    def residuals(self, U, phi):
        a = self.approx
        return self.maps.L(U, phi) - a.f, self.maps.B(U, phi) - a.g

    def error_terms(self, st: IterationState, mod: ModifiedState, lin: LinearizedProblem,
                    dUdot, dU, dphi, L_old, L_new, B_old, B_new) -> ErrorTerms:
        m = self.maps
        dn = m.dL(st.U, st.phi, dU, dphi)
        ds = m.dL(mod.U_smooth, mod.phi_smooth, dU, dphi)
        dm = m.dL(mod.U, mod.phi, dU, dphi)
        bn = m.dB(st.U, st.phi, dU, dphi)
        bs = m.dB(mod.U_smooth, mod.phi_smooth, dU, dphi)
        bm = m.dB(mod.U, mod.phi, dU, dphi)
        Le, Lb = lin.apply(dUdot, dphi)
        f_n, g_n = st.f[-1], st.g[-1]
        return ErrorTerms(e1=L_new - L_old - dn, e2=dn - ds, e3=ds - dm, D=dm - Le, r=Le - f_n,
                          et1=B_new - B_old - bn, et2=bn - bs, et3=bs - bm, Dt=bm - Lb,
                          rt=Lb - g_n)

    def _norms(self, prefix, f, surface="interior", s_range=None):
        g = self.grid
        s_range = range(0, self.cfg.s_top + 1) if s_range is None else s_range
        return {f"{prefix}_H{s}": sobolev_norm(f, g, s, surface) for s in s_range}

    def step(self, st: IterationState) -> IterationState:
        cfg, g, a, P = self.cfg, self.grid, self.approx, self.approx.problem
        n = st.n
        theta = float(self.sched.theta[n])
        mod = modified_state(st.U, st.phi, theta, self.maps, self.smoother)
        basic = validate_basic_state(P, a.U + mod.U, a.phi + mod.phi,
                                     checks=("lift", "hyperbolicity", "slope"))
        lin = LinearizedProblem(basic)
        data = LinearData(st.f[-1], np.stack([st.g[-1], np.zeros(g.boundary_shape)], -1))
        sol = lin.solve(data, "bdf2")
        dPsi = P.chi(g.x1)[None, :, None, None] * sol.phi[:, None]
        dU = np.real(good_unknown_transform(sol.U, dPsi, basic, "inverse"))
        dphi = sol.phi
        U_new, phi_new = st.U + dU, st.phi + dphi
        L_old, B_old = self.maps.L(st.U, st.phi), self.maps.B(st.U, st.phi)
        L_new, B_new = self.maps.L(U_new, phi_new), self.maps.B(U_new, phi_new)
        err = self.error_terms(st, mod, lin, sol.U, dU, dphi, L_old, L_new, B_old, B_new)
        # decomposition telescopes: calL(U_{n+1}) - calL(U_n) = f_n + e_n
        scale = max(1.0, float(np.max(np.abs(L_new))), float(np.max(np.abs(st.f[-1]))))
        dec = max(float(np.max(np.abs(L_new - L_old - st.f[-1] - err.e))),
                  float(np.max(np.abs(B_new - B_old - st.g[-1] - err.et)))) / scale
        self.max_decomposition = max(self.max_decomposition, dec)
        # right-hand sides for n + 1 (incremental form) and the direct check
        E_new, Et_new = st.E + err.e, st.Et + err.et
        dS = lambda h: self.S(h, n + 1) - self.S(h, n)
        dSb = lambda h: self.Sb(h, n + 1) - self.Sb(h, n)
        f_next = dS(a.f) - dS(st.E) - self.S(err.e, n + 1)
        g_next = dSb(a.g) - dSb(st.Et) - self.Sb(err.et, n + 1)
        f_sum = sum(st.f) + f_next
        g_sum = sum(st.g) + g_next
        f_direct = self.S(a.f, n + 1) - self.S(E_new, n + 1) - sum(st.f)
        gap = float(np.max(np.abs(f_direct - f_next))) / scale
        self.max_incremental_gap = max(self.max_incremental_gap, gap)
        tele = max(float(np.max(np.abs(f_sum + self.S(E_new, n + 1) - self.S(a.f, n + 1)))),
                   float(np.max(np.abs(g_sum + self.Sb(Et_new, n + 1) - self.Sb(a.g, n + 1))))) / scale
        self.max_telescoping = max(self.max_telescoping, tele)
        if tele > cfg.telescoping_tol or dec > cfg.telescoping_tol:
            raise DivergenceError(f"telescoping identity broken ({tele:.2e}, {dec:.2e})",
                                  module="nashmoser", operation="nash_moser_step")
        res_i, res_b = L_new - a.f, B_new - a.g
        row = {"n": n, "theta": theta, "Delta": float(self.sched.delta[n]),
               "kinematic_defect": mod.defect, "linear_residual": sol.residual,
               "telescoping": tele, "decomposition": dec, "incremental_gap": gap}
        row.update(self._norms("res", res_i))
        row.update(self._norms("bres", res_b, "boundary"))
        row.update(self._norms("step", dU, s_range=range(3, cfg.s_top + 1)))
        for s in range(3, cfg.s_top + 1):
            row[f"step_H{s}"] += sobolev_norm(dphi, g, s, "boundary")
        for name in ("e1", "e2", "e3", "D", "r"):
            row[f"{name}_L2"] = sobolev_norm(getattr(err, name), g, 0)
        for name in ("et1", "et2", "et3", "Dt", "rt"):
            row[f"{name}_L2"] = sobolev_norm(getattr(err, name), g, 0, "boundary")
        row["D_dropped_L2"] = sobolev_norm(self.dropped_term(basic, dPsi), g, 0)
        new = IterationState(n + 1, U_new, phi_new, st.f + [f_next], st.g + [g_next], E_new, Et_new,
                             st.e_hist + [err.e], st.et_hist + [err.et], st.dU_hist + [dU],
                             st.dphi_hist + [dphi], st.rows + [row])
        return new

    def dropped_term(self, basic, dPsi):
        """(dPsi / d1Phi_hat) d_1 L_h(U_hat, Psi_hat): the zero-order term left out of
        the effective operator."""
        g = self.grid
        Lh = np.real(self.approx.problem.operator(basic.U, basic.phi))
        return (dPsi / np.real(basic.geom.d1Phi))[..., None] * apply_along(g.D1, Lh, 1)

    def run(self) -> tuple[IterationState, bool]:
        cfg = self.cfg
        st = self.initial_state()
        res0_i, res0_b = self.residuals(st.U, st.phi)
        r0 = sobolev_norm(res0_i, self.grid, 3)
        b0 = sobolev_norm(res0_b, self.grid, 3, "boundary")
        self.initial_residual = r0
        if r0 == 0.0 and b0 == 0.0:
            return st, True
        best, bad = np.inf, 0
        converged = False
        for _ in range(cfg.max_iter):
            st = self.step(st)
            r = st.rows[-1]["res_H3"]
            log.info("iteration %d: theta=%.3f res_H3=%.3e", st.n, st.rows[-1]["theta"], r)
            if self.on_iterate is not None:
                self.on_iterate(st)
            if not np.isfinite(r):
                raise DivergenceError("non-finite residual", table=st.rows, module="nashmoser",
                                      operation="run")
            if r <= cfg.tol * r0:
                converged = True
                break
            bad = bad + 1 if r > best else 0
            best = min(best, r)
            if bad >= cfg.patience and r > cfg.growth * best:
                raise DivergenceError(f"residual grew for {bad} steps", table=st.rows,
                                      module="nashmoser", operation="run")
            if bad >= 2 * cfg.patience:
                raise DivergenceError(f"no progress for {bad} steps", table=st.rows,
                                      module="nashmoser", operation="run")
        return st, converged


def run(make_approximation: Callable[[float], Approximation], T: float, cfg: NashMoserConfig,
        on_iterate: Callable | None = None) -> NashMoserResult:
    """Iterate; on divergence or a lost basic-state margin halve T and restart."""
    last_exc = None
    for halving in range(cfg.max_halvings + 1):
        Tc = T / 2**halving
        approx = make_approximation(Tc)
        solver = NashMoserSolver(approx, cfg, on_iterate)
        try:
            st, converged = solver.run()
        except (DivergenceError, BasicStateViolation, LiftViolation) as exc:
            log.warning("run at T=%.4g failed: %s", Tc, exc)
            last_exc = exc
            continue
        P = approx.problem
        g = approx.grid
        U_full = shift_unknown(approx.U + st.U, P.profile, g.x1[None, :, None, None], "from-shifted")
        mon = convergence_monitor(st, cfg) if st.rows else None
        return NashMoserResult(U_full, approx.phi + st.phi, st.U, st.phi, st.n, converged, st.rows,
                               mon, Tc, halving, solver.max_telescoping, solver.max_decomposition,
                               solver.max_incremental_gap)
    if isinstance(last_exc, DivergenceError):
        raise last_exc
    raise DivergenceError(f"no convergence after {cfg.max_halvings} halvings of T: {last_exc}",
                          module="nashmoser", operation="run")


def nash_moser_step(solver: NashMoserSolver, state: IterationState) -> IterationState:
    return solver.step(state)


def rhs_update(solver: NashMoserSolver, state: IterationState, e_n, et_n):
    """(f_{n+1}, g_{n+1}) in incremental form from E_n and the newest error."""
    n = state.n
    a = solver.approx
    dS = solver.S(a.f, n + 1) - solver.S(a.f, n) - (solver.S(state.E, n + 1) - solver.S(state.E, n))
    dSb = solver.Sb(a.g, n + 1) - solver.Sb(a.g, n) - (solver.Sb(state.Et, n + 1) - solver.Sb(state.Et, n))
    return dS - solver.S(e_n, n + 1), dSb - solver.Sb(et_n, n + 1)


__all__ = ["NashMoserConfig", "Approximation", "NonlinearMaps", "approximation_from_data",
           "manufactured_reference", "ModifiedState", "IterationState", "ErrorTerms",
           "modified_state", "convergence_monitor", "HnReport", "NashMoserResult", "NashMoserSolver",
           "run", "nash_moser_step", "rhs_update"]
