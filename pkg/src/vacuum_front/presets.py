"""Named analytic initial data sampled on the spatial slab.

All presets return the shifted unknown U0 of shape (n1, n2, n3, 5) and the
front phi0 of shape (n2, n3).
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ParameterError
from .problem import FreeBoundaryProblem

PRESETS = ("rest", "bump", "wavefront")


def rest_entropy(problem: FreeBoundaryProblem):
    """S(x1) giving rho = 2 eps / G along the linear pressure profile.

    Gravity then balances the profile gradient exactly. Only the stiffened gas
    admits such a state down to p = 0, and only while X1 < c0^2 / G.
    """
    eos = problem.model.eos
    g = problem.grid
    eps, G = problem.profile.eps, problem.model.G
    if getattr(eos, "name", "") != "stiffened":
        raise ParameterError("the gravity-balanced rest state needs the stiffened-gas law",
                             module="presets", operation="rest")
    target = 2.0 * eps / G - 2.0 * eps * g.x1 / eos.c0**2
    if np.any(target <= 0):
        raise ParameterError(f"rest state needs X1 < c0^2/G (X1 = {g.X1})", module="presets",
                             operation="rest")
    return -eos.cV * np.log(target / eos.rho_ref)


def rest_state(problem: FreeBoundaryProblem):
    g = problem.grid
    U = np.zeros(g.space_shape + (5,))
    U[..., 4] = rest_entropy(problem)[:, None, None]
    return U, np.zeros(g.boundary_shape[1:])


def _smooth_bump(x, a, b):
    y = (np.asarray(x, dtype=float) - a) / (b - a)
    out = np.zeros_like(y)
    m = (y > 0) & (y < 1)
    out[m] = np.exp(1.0 - 1.0 / (1.0 - (2.0 * y[m] - 1.0) ** 2))
    return out


def bump_state(problem: FreeBoundaryProblem, amplitude: float = 0.02):
    """Rest plus an interior pressure/velocity bump; compatibility is then
    re-enforced at level 1 by the constructive search."""
    from .compat import enforce_first_order

    g = problem.grid
    U, phi = rest_state(problem)
    X1, X2, X3 = g.space_mesh()
    a, b = 0.3 * g.X1, 0.75 * g.X1
    env = _smooth_bump(X1, a, b)
    U[..., 0] += amplitude * env * (1.0 + 0.5 * np.cos(X2))
    U[..., 1] += 0.5 * amplitude * env * np.sin(X2)
    U, _, _ = enforce_first_order(problem, U, phi)
    return U, phi


def wavefront_state(problem: FreeBoundaryProblem, amplitude: float = 0.05,
                    velocity=(0.05, 0.1, 0.0)):
    """Front phi0 = a cos(x2) over the rest state with a uniform velocity."""
    g = problem.grid
    U, _ = rest_state(problem)
    v = np.asarray(velocity, dtype=float)
    U[..., 1:4] = problem.model.velocity_to_state(v)
    phi = amplitude * np.cos(g.x2)[:, None] + 0.0 * g.x3[None, :]
    return U, phi


def wavefront_phi1(problem: FreeBoundaryProblem, amplitude: float = 0.05, velocity=(0.05, 0.1, 0.0)):
    """Closed form d_t phi at t = 0 for the wavefront preset: v1 - v2 d2phi0 - v3 d3phi0."""
    g = problem.grid
    v = np.asarray(velocity, dtype=float)
    return v[0] + v[1] * amplitude * np.sin(g.x2)[:, None] + 0.0 * g.x3[None, :]


def preset_initial_data(name: str, problem: FreeBoundaryProblem):
    if name == "rest":
        return rest_state(problem)
    if name == "bump":
        return bump_state(problem)
    if name == "wavefront":
        return wavefront_state(problem)
    raise ConfigError(f"unknown preset '{name}' (known: {', '.join(PRESETS)})", module="presets",
                      operation="preset_initial_data")


def boundary_slope_margin(problem: FreeBoundaryProblem, U0):
    """min over x' of (2 eps + d1 p) - eps at x1 = 0, the physical pressure slope
    margin over eps."""
    g = problem.grid
    d1p = np.tensordot(g.D1[0], U0[..., 0], axes=(0, 0))
    return float(np.min(2.0 * problem.profile.eps + d1p - problem.profile.eps))
