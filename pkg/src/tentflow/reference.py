"""Constant-density pseudo-spectral reference solver and energy bookkeeping.

Integrating-factor, 2N-storage Runge-Kutta (five stages, fourth order) on
``d_t u = -P(u.grad u) + Delta u`` with 2/3 dealiasing. Used as an
independent oracle for the Picard solver at ``rho = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .grid import SpaceTimeField, TimeGrid, VectorField
from .operators import _duhamel_spectral, heat_flow, leray_spectral

__all__ = [
    "reference_solve",
    "energy_check",
    "EnergyReport",
    "cumulative_log_integral",
    "mild_residual",
]

# Carpenter-Kennedy (1994) low-storage RK4(5) coefficients
_A = np.array([
    0.0,
    -567301805773.0 / 1357537059087.0,
    -2404267990393.0 / 2016746695238.0,
    -3550918686646.0 / 2091501179385.0,
    -1275806237668.0 / 842570457699.0,
])
_B = np.array([
    1432997174477.0 / 9575080441755.0,
    5161836677717.0 / 13612068292357.0,
    1720146321549.0 / 2090206949498.0,
    3134564353537.0 / 4481467310338.0,
    2277821191437.0 / 14882151754819.0,
])
_C = np.array([
    0.0,
    1432997174477.0 / 9575080441755.0,
    2526269341429.0 / 6820363962896.0,
    2006345519317.0 / 3224310063776.0,
    2802321613138.0 / 2924317926251.0,
])


def _advection_spectral(spec: np.ndarray, grid, mask: np.ndarray) -> np.ndarray:
    """``P(u.grad u)`` of a spectral velocity ``(dim, *spec)``, dealiased, mean removed."""
    uh = spec * mask
    up = grid.inverse(uh)
    conv = np.zeros_like(up)
    for j, k in enumerate(grid.odd_wavevectors):
        conv += up[j] * grid.inverse(1j * k * uh)
    out = leray_spectral(grid.forward(conv) * mask, grid)
    out[(slice(None),) + (0,) * grid.dim] = 0.0
    return out


def reference_solve(
    u0: VectorField,
    time_grid: TimeGrid,
    cfl: float = 0.5,
    dt_max: float | None = None,
    dealias_fraction: float = 2.0 / 3.0,
) -> SpaceTimeField:
    """Velocity at the nodes of ``time_grid``; substeps land exactly on every node."""
    g = u0.grid
    div = sum(1j * k * u0.spectral[i] for i, k in enumerate(g.odd_wavevectors))
    scale = max(u0.max_abs(), 1e-300)
    if np.max(np.abs(g.inverse(div))) > 1e-8 * scale * max(1.0, 1.0 / g.spacing):
        raise ValueError("reference_solve needs a divergence-free initial velocity")
    mask = g.dealias_mask(dealias_fraction)
    k2 = g.k_squared
    spec = u0.spectral.copy()
    out = np.empty((len(time_grid),) + spec.shape, dtype=complex)
    dt_max = dt_max if dt_max is not None else 0.25 * g.side_length**2 / (4 * math.pi**2)
    t = 0.0
    for m, t_next in enumerate(time_grid.nodes):
        while t < t_next:
            umax = float(np.max(np.abs(g.inverse(spec))))
            dt_cfl = cfl * g.spacing / umax if umax > 0 else math.inf
            span = t_next - t
            steps = max(1, int(math.ceil(span / min(dt_cfl, dt_max))))
            h = span / steps
            if not np.isfinite(h) or h <= 0:
                raise FloatingPointError("CFL violation: time step collapsed")
            for _ in range(steps):
                spec = _rk_step(spec, h, k2, g, mask)
            if not np.all(np.isfinite(spec)):
                raise FloatingPointError("reference solve blew up")
            t = t_next
        out[m] = spec
    return SpaceTimeField.from_spectral(time_grid, g, out)


def _rk_step(spec, h, k2, g, mask):
    # w(tau) = e^{tau k^2} u^(t_n + tau); dw/dtau = -e^{tau k^2} P(u.grad u)
    w = spec.copy()
    dw = np.zeros_like(spec)
    for a, b, c in zip(_A, _B, _C):
        tau = c * h
        u_stage = w * np.exp(-tau * k2)
        rhs = -np.exp(tau * k2) * _advection_spectral(u_stage, g, mask)
        dw = a * dw + h * rhs
        w = w + b * dw
    return w * np.exp(-h * k2)


def cumulative_log_integral(t: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``int_0^{t_m} g dt`` at every node.

    Simpson's rule in ``s = log t`` above ``t_1``; below ``t_1`` the integrand
    is extrapolated as a power law through the first two nodes.
    """
    t = np.asarray(t, dtype=float)
    g = np.asarray(g, dtype=float)
    s = np.log(t)
    body = cumulative_simpson(g * t, x=s, initial=0.0)
    if g[0] > 0 and g[1] > 0:
        p = math.log(g[1] / g[0]) / math.log(t[1] / t[0])
        tail = g[0] * t[0] / (p + 1) if p > -1 else math.inf
    else:
        tail = g[0] * t[0]
    return body + tail


@dataclass
class EnergyReport:
    max_excess: float
    lhs: np.ndarray
    rhs: float
    tolerance: float = 1e-3

    @property
    def passed(self) -> bool:
        return bool(self.max_excess <= self.tolerance)


def energy_check(traj: SpaceTimeField, u0: VectorField | None = None, tolerance: float = 1e-3) -> EnergyReport:
    """``max_t (E(t) - E_0) / E_0`` with ``E(t) = 1/2 ||u(t)||^2 + int_0^t ||grad u||^2``.

    Without ``u0`` the initial energy is taken from the first node plus the
    dissipation below it (energy balance over ``[0, t_1]``).
    """
    g = traj.grid
    spec = traj.spectral
    half = 0.5 * np.sum(g.spectral_l2_squared(spec), axis=1)
    grad_sq = np.sum(g.spectral_l2_squared(spec * np.sqrt(g.k_squared)), axis=1)
    diss = cumulative_log_integral(traj.time_grid.nodes, grad_sq)
    lhs = half + diss
    if u0 is not None:
        rhs = 0.5 * float(np.sum(g.spectral_l2_squared(u0.spectral)))
    else:
        rhs = float(lhs[0])
    if rhs <= 0:
        return EnergyReport(0.0 if np.all(lhs <= 0) else math.inf, lhs, rhs, tolerance)
    return EnergyReport(float(np.max((lhs - rhs) / rhs)), lhs, rhs, tolerance)


def mild_residual(traj: SpaceTimeField, u0: VectorField, dealias_fraction: float = 2.0 / 3.0) -> float:
    """Relative space-time L2 residual of the constant-density mild equation."""
    g, tg = traj.grid, traj.time_grid
    mask = g.dealias_mask(dealias_fraction)
    f = np.stack([_advection_spectral(s, g, mask) for s in traj.spectral])
    duh = _duhamel_spectral(f, tg.nodes, g.k_squared)
    res = traj.spectral - heat_flow(u0, tg).spectral + duh
    num = np.sum(tg.weights * np.sum(g.spectral_l2_squared(res), axis=1))
    den = np.sum(tg.weights * np.sum(g.spectral_l2_squared(traj.spectral), axis=1))
    return float(math.sqrt(num / den)) if den > 0 else 0.0
