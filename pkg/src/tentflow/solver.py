"""Picard solver for inhomogeneous incompressible Navier-Stokes in mild form.

The velocity iterate is a whole trajectory on a log time grid,

    u = e^{t Delta} u0 - int e^{(t-s) Delta} P(rho u.grad u) ds
                       - int e^{(t-s) Delta} P(a d_s u) ds,      a = rho - 1,

and the density is re-transported from ``t = 0`` along every new iterate by a
semi-Lagrangian scheme that obeys the discrete maximum principle.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from . import kernels
from .grid import (
    PeriodicGrid,
    ScalarField,
    SpaceTimeField,
    TimeGrid,
    VectorField,
    make_log_time_grid,
)
from .norms import BallFamily, EAlphaReport, e_alpha_norm, u_alpha_norm
from .operators import (
    _duhamel_spectral,
    heat_flow,
    leray_project,
    leray_spectral,
    mollify,
    time_derivative,
)

__all__ = [
    "SolverConfig",
    "SolverStatus",
    "SolverState",
    "DuhamelSplit",
    "PreparedData",
    "prepare_data",
    "transport_density",
    "transport_along",
    "picard_step",
    "initial_state",
    "solve",
]


class SolverConfig(BaseModel):
    """Grid, smallness target, time grid and iteration controls of one solve."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    dim: int = 2
    L: float = 2 * math.pi
    N: int = 64
    alpha: float = 0.5
    eps0: float = 0.1
    t_final: float = 0.1
    time_nodes: int = 64
    t_first_ratio: float = 1e-4
    picard_max: int = 30
    picard_tol: float = 1e-8
    dealias_fraction: float = 2.0 / 3.0
    mollify_k: int = 20
    besov_stride: int = 4

    @field_validator("alpha")
    @classmethod
    def _alpha(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        return v

    @field_validator("eps0", "t_final", "L")
    @classmethod
    def _positive(cls, v):
        if not v > 0:
            raise ValueError("must be > 0")
        return v

    @field_validator("picard_tol")
    @classmethod
    def _tol(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError("picard_tol must lie in (0, 1)")
        return v

    @field_validator("dealias_fraction")
    @classmethod
    def _dealias(cls, v):
        if not 0.5 < v <= 1.0:
            raise ValueError("dealias_fraction must lie in (1/2, 1]")
        return v

    @model_validator(mode="after")
    def _grid_ok(self):
        self.grid()
        if self.time_nodes < 5:
            raise ValueError("time_nodes must be >= 5")
        if not 0.0 < self.t_first_ratio < 1.0:
            raise ValueError("t_first_ratio must lie in (0, 1)")
        if self.picard_max < 1 or self.mollify_k < 0 or self.besov_stride < 1:
            raise ValueError("picard_max and besov_stride must be >= 1, mollify_k >= 0")
        return self

    def grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.dim, self.L, self.N)

    def time_grid(self) -> TimeGrid:
        return make_log_time_grid(self.t_final * self.t_first_ratio, self.t_final, self.time_nodes)


class SolverStatus(str, enum.Enum):
    CONVERGED = "CONVERGED"
    MAX_ITERS = "MAX_ITERS"
    DIVERGED = "DIVERGED"


@dataclass
class DuhamelSplit:
    u_L: SpaceTimeField
    v: SpaceTimeField
    w: SpaceTimeField

    def total(self) -> SpaceTimeField:
        return self.u_L + self.v + self.w


@dataclass
class SolverState:
    rho0: ScalarField
    rho_traj: np.ndarray
    u_traj: SpaceTimeField
    dt_u_traj: SpaceTimeField
    iterate_index: int = 0
    diagnostics: list = field(default_factory=list)
    status: SolverStatus | None = None
    dt_rel_error: float = 0.0
    u0_spec: np.ndarray | None = field(default=None, repr=False)
    prepared: "PreparedData | None" = None
    last_report: EAlphaReport | None = None

    @property
    def rho(self) -> ScalarField:
        """Density at the last time node."""
        return ScalarField(self.u_traj.grid, self.rho_traj[-1])

    @property
    def a(self) -> ScalarField:
        return ScalarField(self.u_traj.grid, self.rho_traj[-1] - 1.0)

    def rho_deviation(self) -> np.ndarray:
        """``||rho(t_m) - 1||_inf`` per node."""
        M = self.rho_traj.shape[0]
        return np.abs(self.rho_traj.reshape(M, -1) - 1.0).max(axis=1)

    def increments(self) -> list[float]:
        return [d["increment"] for d in self.diagnostics if d["increment"] is not None]


@dataclass
class PreparedData:
    u0: VectorField
    rho0: ScalarField
    u_norm_raw: float
    u_norm_mollified: float
    c_moll: float
    scale_factor: float


def prepare_data(u0_raw: VectorField, rho0: ScalarField, cfg: SolverConfig,
                 balls: BallFamily | None = None) -> PreparedData:
    """Mollify, project and (if needed) shrink the data into the smallness ball.

    The density cannot be rescaled, so ``||rho0 - 1||_inf > eps0`` is an error.
    """
    if np.any(rho0.values <= 0):
        raise ValueError("density must be strictly positive")
    if u0_raw.grid != rho0.grid:
        raise ValueError("velocity and density live on different grids")
    dev = float(np.max(np.abs(rho0.values - 1.0)))
    if dev > cfg.eps0:
        raise ValueError(
            f"||rho0 - 1||_inf = {dev:.4g} exceeds eps0 = {cfg.eps0:.4g}; density is not rescalable"
        )
    u0 = leray_project(mollify(u0_raw, cfg.mollify_k))
    n_raw = u_alpha_norm(u0_raw, cfg.alpha, balls).value
    n_mol = u_alpha_norm(u0, cfg.alpha, balls).value
    c_moll = n_mol / n_raw if n_raw > 0 else 0.0
    factor = 1.0
    if n_mol > 0 and n_mol + dev > cfg.eps0:
        factor = (cfg.eps0 - dev) / n_mol
        u0 = u0 * factor
        n_mol *= factor
    return PreparedData(u0, rho0, n_raw, n_mol, c_moll, factor)


def _velocity_at(u_traj: SpaceTimeField, t: float) -> np.ndarray:
    """Velocity at time ``t`` (linear in ``t`` between nodes, held below ``t_1``)."""
    nodes = u_traj.time_grid.nodes
    if t <= nodes[0]:
        return u_traj.values[0]
    if t >= nodes[-1]:
        return u_traj.values[-1]
    m = int(np.searchsorted(nodes, t) - 1)
    th = (t - nodes[m]) / (nodes[m + 1] - nodes[m])
    return (1 - th) * u_traj.values[m] + th * u_traj.values[m + 1]


def _interp_components(vel: np.ndarray, pts: np.ndarray, n: int) -> np.ndarray:
    return np.stack([kernels.interp_periodic(np.ascontiguousarray(c.reshape(-1)), pts, n)
                     for c in vel], axis=1)


def _sl_step(rho: np.ndarray, vel_mid: np.ndarray, dt: float, grid: PeriodicGrid) -> np.ndarray:
    """One semi-Lagrangian step with midpoint back-tracing (index units)."""
    n, h, dim = grid.points_per_axis, grid.spacing, grid.dim
    idx = np.stack(np.meshgrid(*([np.arange(n, dtype=float)] * dim), indexing="ij"), -1)
    idx = idx.reshape(-1, dim)
    u_here = vel_mid.reshape(dim, -1).T
    half = idx - 0.5 * dt * u_here / h
    u_half = _interp_components(vel_mid, np.ascontiguousarray(half), n)
    disp = dt * u_half / h
    if np.max(np.abs(disp)) * h > grid.side_length / 4:
        warnings.warn("back-trace excursion beyond L/4 in one transport step", RuntimeWarning,
                      stacklevel=3)
    dep = np.ascontiguousarray(idx - disp)
    # interpolate the deviation from 1 so that rho = 1 is reproduced exactly
    out = kernels.interp_periodic(np.ascontiguousarray(rho.reshape(-1) - 1.0), dep, n)
    return out.reshape(grid.shape) + 1.0


def transport_density(rho: ScalarField, u_traj: SpaceTimeField, t_from: float, t_to: float,
                      max_cfl: float = 1.0) -> ScalarField:
    """Advect ``rho`` from ``t_from`` to ``t_to`` along ``u_traj``.

    Substeps keep the departure displacement below ``max_cfl`` cells; the
    multilinear read-out is a convex combination, so values stay within
    ``[min rho, max rho]``.
    """
    if not t_from < t_to:
        raise ValueError("transport needs t_from < t_to")
    if t_to > u_traj.time_grid.t_max * (1 + 1e-12) or t_from < 0:
        raise ValueError("transport interval outside the trajectory span")
    g = rho.grid
    umax = float(np.sqrt(u_traj.pointwise_sq()).max())
    span = t_to - t_from
    steps = max(1, int(math.ceil(span * umax / (max_cfl * g.spacing))))
    out = rho.values
    for s in range(steps):
        a = t_from + span * s / steps
        b = t_from + span * (s + 1) / steps
        out = _sl_step(out, _velocity_at(u_traj, 0.5 * (a + b)), b - a, g)
    return ScalarField(g, out)


def transport_along(rho0: ScalarField, u_traj: SpaceTimeField) -> np.ndarray:
    """Density at every node of ``u_traj``, transported from ``t = 0``."""
    nodes = u_traj.time_grid.nodes
    out = np.empty((nodes.size,) + rho0.grid.shape)
    rho = transport_density(rho0, u_traj, 0.0, nodes[0])
    out[0] = rho.values
    for m in range(1, nodes.size):
        rho = transport_density(rho, u_traj, nodes[m - 1], nodes[m])
        out[m] = rho.values
    return out


def _dealiased(grid: PeriodicGrid, spec: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return grid.inverse(spec * mask)


def nonlinear_terms(u: SpaceTimeField, dt_u: SpaceTimeField, rho_traj: np.ndarray,
                    fraction: float) -> tuple[np.ndarray, np.ndarray]:
    """Spectra of ``P(rho u.grad u)`` and ``P(a d_t u)``, dealiased, mean mode removed."""
    g = u.grid
    mask = g.dealias_mask(fraction)
    uh = u.spectral * mask
    up = g.inverse(uh)
    conv = np.zeros_like(up)
    for j, k in enumerate(g.odd_wavevectors):
        conv += up[:, j : j + 1] * g.inverse(1j * k * uh)
    conv = g.inverse(g.forward(conv) * mask)
    # a = rho - 1 is filtered directly so that rho = 1 gives a = 0 exactly
    a_d = _dealiased(g, g.forward(rho_traj - 1.0), mask)[:, np.newaxis]
    dt_d = _dealiased(g, dt_u.spectral, mask)
    f1 = g.forward((1.0 + a_d) * conv) * mask
    f2 = g.forward(a_d * dt_d) * mask
    f1 = leray_spectral(f1, g)
    f2 = leray_spectral(f2, g)
    zero = (slice(None), slice(None)) + (0,) * g.dim
    f1[zero] = 0.0
    f2[zero] = 0.0
    return f1, f2


def _divergence_max(u: SpaceTimeField) -> np.ndarray:
    g = u.grid
    spec = u.spectral
    acc = sum(1j * k * spec[:, i] for i, k in enumerate(g.odd_wavevectors))
    return np.abs(g.inverse(acc)).reshape(spec.shape[0], -1).max(axis=1)


def energy_profile(u: SpaceTimeField) -> tuple[np.ndarray, np.ndarray]:
    """``(1/2 ||u(t)||^2, int_0^t ||grad u||^2)`` at the nodes of ``u``."""
    from .reference import cumulative_log_integral

    g = u.grid
    half = 0.5 * np.sum(g.spectral_l2_squared(u.spectral), axis=1)
    grad_sq = np.sum(g.spectral_l2_squared(u.spectral * np.sqrt(g.k_squared)), axis=1)
    return half, cumulative_log_integral(u.time_grid.nodes, grad_sq)


def _space_time_l2(u: np.ndarray, tg: TimeGrid) -> float:
    M = u.shape[0]
    return float(np.sqrt(np.sum(tg.weights * np.sum(u.reshape(M, -1) ** 2, axis=1))))


def _record(state: SolverState, cfg: SolverConfig, e_report: EAlphaReport | None,
            increment: float | None) -> None:
    u = state.u_traj
    lhs_half, diss = energy_profile(u)
    rhs = 0.5 * float(np.sum(u.grid.spectral_l2_squared(state.u0_spec)))
    state.last_report = e_report
    state.diagnostics.append({
        "iter": state.iterate_index,
        "t": u.time_grid.nodes.copy(),
        "E_alpha": e_report.components() if e_report is not None else None,
        "E_alpha_total": e_report.total if e_report is not None else float("nan"),
        "rho_dev": state.rho_deviation(),
        "energy_lhs": lhs_half + diss,
        "energy_rhs": rhs,
        "div_max": _divergence_max(u),
        "increment": increment,
    })


def initial_state(u0: VectorField, rho0: ScalarField, cfg: SolverConfig) -> SolverState:
    """Linear trajectory ``e^{t Delta} u0`` and the density transported along it."""
    tg = cfg.time_grid()
    u_L = heat_flow(u0, tg)
    dt_u, rel = time_derivative(u_L)
    return SolverState(rho0, transport_along(rho0, u_L), u_L, dt_u, dt_rel_error=rel,
                       u0_spec=u0.spectral)


def picard_step(state: SolverState, u0: VectorField, cfg: SolverConfig,
                balls: BallFamily | None = None, e_alpha: bool = True
                ) -> tuple[SolverState, DuhamelSplit]:
    """One substitution into the mild formula; returns the new state and its split."""
    u = state.u_traj
    g, tg = u.grid, u.time_grid
    f1, f2 = nonlinear_terms(u, state.dt_u_traj, state.rho_traj, cfg.dealias_fraction)
    k2 = g.k_squared
    u_L = heat_flow(u0, tg)
    v_spec = -_duhamel_spectral(f1, tg.nodes, k2)
    w_spec = -_duhamel_spectral(f2, tg.nodes, k2)
    v = SpaceTimeField.from_spectral(tg, g, v_spec) if np.all(np.isfinite(v_spec)) else None
    w = SpaceTimeField.from_spectral(tg, g, w_spec) if np.all(np.isfinite(w_spec)) else None
    if v is None or w is None:
        raise FloatingPointError("Picard iterate became non-finite")
    new_spec = u_L.spectral + v_spec + w_spec
    try:
        new_u = SpaceTimeField.from_spectral(tg, g, new_spec)
    except ValueError as exc:
        raise FloatingPointError("Picard iterate became non-finite") from exc
    dt_u, rel = time_derivative(new_u)
    rho_traj = transport_along(state.rho0, new_u)
    diff = _space_time_l2(new_u.values - u.values, tg)
    ref = _space_time_l2(new_u.values, tg)
    increment = diff / ref if ref > 0 else 0.0
    new_state = SolverState(state.rho0, rho_traj, new_u, dt_u, state.iterate_index + 1,
                            state.diagnostics, dt_rel_error=rel, u0_spec=u0.spectral,
                            prepared=state.prepared)
    rep = e_alpha_norm(new_u, cfg.alpha, balls, besov_stride=cfg.besov_stride,
                       dt_u=dt_u) if e_alpha else None
    _record(new_state, cfg, rep, increment)
    return new_state, DuhamelSplit(u_L, v, w)


def solve(u0_raw: VectorField, rho0: ScalarField, cfg: SolverConfig,
          balls: BallFamily | None = None) -> tuple[SolverState, EAlphaReport]:
    """Prepare data, then iterate Picard steps until both change measures fall below tolerance."""
    g = cfg.grid()
    if u0_raw.grid != g:
        raise ValueError("initial data grid does not match the solver config")
    balls = balls or BallFamily.default(g)
    prep = prepare_data(u0_raw, rho0, cfg, balls)
    state = initial_state(prep.u0, prep.rho0, cfg)
    state.prepared = prep
    first = e_alpha_norm(state.u_traj, cfg.alpha, balls, besov_stride=cfg.besov_stride,
                         dt_u=state.dt_u_traj)
    _record(state, cfg, first, None)
    prev_total = first.total
    report = first
    status = SolverStatus.MAX_ITERS
    base_inc = None
    for _ in range(cfg.picard_max):
        try:
            new_state, _split = picard_step(state, prep.u0, cfg, balls)
        except FloatingPointError:
            status = SolverStatus.DIVERGED
            break
        diag = new_state.diagnostics[-1]
        report = new_state.last_report
        total = report.total
        inc = diag["increment"]
        state = new_state
        if not math.isfinite(total) or (base_inc is not None and inc > 1e3 * max(base_inc, 1e-300)):
            status = SolverStatus.DIVERGED
            break
        if base_inc is None:
            base_inc = inc
        e_change = abs(total - prev_total) / prev_total if prev_total > 0 else abs(total)
        prev_total = total
        if inc < cfg.picard_tol and e_change < cfg.picard_tol:
            status = SolverStatus.CONVERGED
            break
    state.status = status
    return state, report
