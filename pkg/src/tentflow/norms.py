"""Tent-space norms on the torus.

Every norm here is a supremum over a finite family of parabolic tents
``B(x0, r) x (0, r^2]`` of a weighted space-time square (or p-th power)
average. Spatial integrals over a ball use fractional cell coverage; time
integrals use the log-scale quadrature of :class:`~tentflow.grid.TimeGrid`
plus a power-law extrapolation below the first node.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels
from .grid import (
    Field,
    PeriodicGrid,
    SpaceTimeField,
    TimeGrid,
    VectorField,
)
from .operators import gradient_spectral, heat_flow, time_derivative

__all__ = [
    "BallFamily",
    "TentFamily",
    "TentWeight",
    "NormReport",
    "EAlphaReport",
    "tent_time_grid",
    "u_alpha_norm",
    "bmo_minus1_norm",
    "tent_T_norm",
    "tent_boldT_norm",
    "classic_tent_norm",
    "v_alpha_norm",
    "besov_heatflow_norm",
    "sobolev_norm",
    "e_alpha_norm",
]


def _ball_stencil(grid: PeriodicGrid, r: float, supersample: int) -> tuple[np.ndarray, np.ndarray]:
    """Offsets (grid units) and coverage fractions of the cells meeting ``B(0, r)``."""
    h, dim = grid.spacing, grid.dim
    R = int(math.ceil(r / h)) + 1
    ax = np.arange(-R, R + 1)
    offs = np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    pos = np.abs(offs * h)
    near = np.sqrt(np.sum(np.clip(pos - 0.5 * h, 0.0, None) ** 2, axis=1))
    far = np.sqrt(np.sum((pos + 0.5 * h) ** 2, axis=1))
    w = np.where(far <= r, 1.0, 0.0)
    edge = (near < r) & (far > r)
    if np.any(edge):
        sub = ((np.arange(supersample) + 0.5) / supersample - 0.5) * h
        sub = np.stack(np.meshgrid(*([sub] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
        pts = offs[edge][:, None, :] * h + sub[None, :, :]
        w[edge] = np.mean(np.sum(pts**2, axis=-1) <= r * r, axis=1)
    keep = w > 0
    return np.ascontiguousarray(offs[keep], dtype=np.int64), np.ascontiguousarray(w[keep])


@dataclass(frozen=True, eq=False)
class BallFamily:
    """Centers (grid indices) and dyadic radii ``L 2^{-j}`` of the sampled tents."""

    grid: PeriodicGrid
    centers: np.ndarray
    radii: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(np.atleast_2d(np.asarray(self.centers, dtype=np.int64)))
        r = np.asarray(self.radii, dtype=float).reshape(-1)
        if c.shape[1] != self.grid.dim or c.shape[0] == 0:
            raise ValueError("centers must be a non-empty (count, dim) index array")
        if r.size < 3:
            raise ValueError("a ball family needs at least 3 radii")
        if np.any(r > self.grid.side_length / 4 * (1 + 1e-12)):
            raise ValueError("ball radii are capped at L/4 to avoid wrap-around")
        if np.any(np.diff(r) >= 0) or np.any(r <= 0):
            raise ValueError("radii must be positive and strictly decreasing")
        object.__setattr__(self, "centers", c % self.grid.points_per_axis)
        object.__setattr__(self, "radii", r)

    @classmethod
    def default(
        cls,
        grid: PeriodicGrid,
        centers_per_axis: int = 8,
        j_min: int = 2,
        j_max: int = 4,
    ) -> "BallFamily":
        """Sub-lattice of ``centers_per_axis^dim`` centers, radii ``L 2^{-j}``."""
        stride = max(1, grid.points_per_axis // centers_per_axis)
        ax = np.arange(0, grid.points_per_axis, stride)
        centers = np.stack(np.meshgrid(*([ax] * grid.dim), indexing="ij"), -1).reshape(-1, grid.dim)
        radii = grid.side_length * 2.0 ** (-np.arange(j_min, j_max + 1, dtype=float))
        return cls(grid, centers, radii)

    def on(self, grid: PeriodicGrid) -> "BallFamily":
        """The same relative family on another grid (scaled with its side length)."""
        scale = grid.points_per_axis / self.grid.points_per_axis
        centers = np.rint(self.centers * scale).astype(np.int64)
        radii = self.radii * grid.side_length / self.grid.side_length
        return BallFamily(grid, centers, radii)

    def refined(self) -> "BallFamily":
        """Twice the centers per axis and one extra, smaller radius."""
        N = self.grid.points_per_axis
        stride = np.unique(np.diff(np.unique(self.centers[:, 0])))
        step = int(stride[0]) // 2 if stride.size and stride[0] >= 2 else 1
        extra = []
        for c in self.centers:
            for shift in np.ndindex(*([2] * self.grid.dim)):
                extra.append((c + step * np.array(shift)) % N)
        centers = np.unique(np.array(extra), axis=0)
        radii = np.concatenate([self.radii, [self.radii[-1] / 2]])
        return BallFamily(self.grid, centers, radii)

    @property
    def center_points(self) -> np.ndarray:
        return self.centers * self.grid.spacing

    @cached_property
    def stencils(self) -> list[tuple[np.ndarray, np.ndarray]]:
        ss = 8 if self.grid.dim == 2 else 4
        return [_ball_stencil(self.grid, r, ss) for r in self.radii]

    def volumes(self) -> np.ndarray:
        return np.array([w.sum() for _, w in self.stencils]) * self.grid.cell_volume

    def summary(self) -> dict:
        return {
            "centers": int(self.centers.shape[0]),
            "radii": [float(r) for r in self.radii],
        }

    def ball_sums(self, density: np.ndarray) -> list[np.ndarray]:
        """Integrals of ``density`` (shape ``(M, N, ..., N)``) over every ball.

        Returns one ``(M, n_centers)`` array per radius.
        """
        M = density.shape[0]
        flat = np.ascontiguousarray(density.reshape(M, -1), dtype=np.float64)
        n = self.grid.points_per_axis
        dv = self.grid.cell_volume
        return [
            dv * kernels.ball_sums(flat, self.centers, offs, w, n) for offs, w in self.stencils
        ]


class TentFamily(str, Enum):
    U = "U"
    T = "T"
    BOLD_T = "BoldT"
    CLASSIC_T = "ClassicT"
    V = "V"


@dataclass(frozen=True)
class TentWeight:
    """Time weight and radius normalization of one norm family."""

    family: TentFamily
    alpha_or_beta: float = 0.0
    p: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "family", TentFamily(self.family))
        if self.family is TentFamily.U and not -1.0 <= self.alpha_or_beta <= 1.0:
            raise ValueError(f"U_alpha needs alpha in [-1, 1], got {self.alpha_or_beta}")
        if self.family is TentFamily.V and not 0.0 < self.alpha_or_beta < 1.0:
            raise ValueError(f"V_alpha needs alpha in (0, 1), got {self.alpha_or_beta}")
        if self.family is TentFamily.CLASSIC_T and self.p < 1:
            raise ValueError(f"classic tent spaces need p >= 1, got {self.p}")

    def time_exponent(self) -> float:
        f, a = self.family, self.alpha_or_beta
        if f is TentFamily.U:
            return -a
        if f in (TentFamily.T, TentFamily.BOLD_T):
            return a
        return 0.0

    def radius_exponent(self, n: int) -> float:
        """``e`` such that the value is ``sup (r^{-e} * integral)^{1/p}``."""
        f, a = self.family, self.alpha_or_beta
        if f in (TentFamily.U, TentFamily.V):
            return n - 2 * a - 2
        if f is TentFamily.T:
            return n + 2 * a - 4
        if f is TentFamily.BOLD_T:
            return n + 2 * a - 2
        return float(n)


@dataclass
class NormReport:
    family: str
    param: float
    value: float
    argmax_center: tuple[float, ...]
    argmax_radius: float
    grid_n: int
    time_nodes: int
    balls: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "param": float(self.param),
            "value": float(self.value),
            "argmax_center": [float(c) for c in self.argmax_center],
            "argmax_radius": float(self.argmax_radius),
            "grid_n": int(self.grid_n),
            "time_nodes": int(self.time_nodes),
        }


@dataclass
class EAlphaReport:
    dt_norm: float
    lap_norm: float
    grad_norm: float
    sqrt_t_sup: float
    besov_sup: float
    dt_rel_error: float = 0.0
    under_resolved: bool = False
    time_truncated: bool = False

    @property
    def total(self) -> float:
        return max(self.dt_norm, self.lap_norm, self.grad_norm, self.sqrt_t_sup, self.besov_sup)

    def components(self) -> dict:
        return {
            "dt_norm": self.dt_norm,
            "lap_norm": self.lap_norm,
            "grad_norm": self.grad_norm,
            "sqrt_t_sup": self.sqrt_t_sup,
            "besov_sup": self.besov_sup,
            "total": self.total,
        }


def tent_time_grid(grid: PeriodicGrid, balls: BallFamily | None = None, per_quarter: int = 12) -> TimeGrid:
    """Log grid from about ``h^2 / 100`` to ``r_max^2`` with every ``r_j^2`` on a node."""
    from .grid import make_log_time_grid

    balls = balls or BallFamily.default(grid)
    t_max = float(balls.radii[0]) ** 2
    t_floor = 1e-2 * grid.spacing**2
    K = int(math.ceil(math.log(t_max / t_floor, 4.0) * per_quarter))
    t_min = t_max * 4.0 ** (-K / per_quarter)
    return make_log_time_grid(t_min, t_max, K + 1)


def _power_tail(t0: float, t1: float, s0: np.ndarray, s1: np.ndarray, w: float,
                floor: float = 0.0) -> np.ndarray:
    """``int_0^{t0} S(t) t^w dt`` with ``S(t) = s0 (t/t0)^p`` fitted through two nodes.

    Values at or below ``floor`` are roundoff and contribute nothing.
    """
    s0 = np.asarray(s0, dtype=float)
    s1 = np.asarray(s1, dtype=float)
    s0 = np.where(s0 > floor, s0, 0.0)
    pos = (s0 > 0) & (s1 > floor)
    p = np.zeros_like(s0)
    p[pos] = np.log(s1[pos] / s0[pos]) / math.log(t1 / t0)
    denom = p + w + 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(denom > 0, s0 * t0 ** (w + 1.0) / denom, np.inf)
    return np.where(s0 > 0, tail, 0.0)


def _tent_sup(
    density: np.ndarray,
    time_grid: TimeGrid,
    balls: BallFamily,
    time_exponent: float,
    radius_exponent: float,
    power: float,
    family: str,
    param: float,
) -> NormReport:
    """``sup_{x0, r} (r^{-e} int_0^{r^2} int_B density * t^w dy dt)^{1/power}``."""
    grid = balls.grid
    t = time_grid.nodes
    sums = balls.ball_sums(density)
    best, best_idx = -1.0, (0, 0)
    tails, truncated = [], False
    per_ball = []
    for i, (r, S) in enumerate(zip(balls.radii, sums)):
        r2 = r * r
        if r2 > time_grid.t_max * (1 + 1e-12):
            truncated = True
        w = time_grid.weights_upto(r2) * t**time_exponent
        body = w @ S
        floor = 1e-13 * float(np.max(np.abs(S), initial=0.0))
        tail = _power_tail(t[0], t[1], S[0], S[1], time_exponent, floor)
        if not np.all(np.isfinite(tail)):
            warnings.warn(
                f"tent integral diverges at t -> 0 for radius {r:.4g}; the weight t^{time_exponent:g} "
                "is not integrable against the sampled density",
                RuntimeWarning,
                stacklevel=3,
            )
        total = body + tail
        val = total / r**radius_exponent
        per_ball.append(val)
        j = int(np.argmax(val))
        if val[j] > best:
            best, best_idx = float(val[j]), (i, j)
        frac = np.divide(tail, total, out=np.zeros_like(total), where=np.isfinite(total) & (total > 0))
        tails.append(float(np.max(frac)))
    i, j = best_idx
    value = max(best, 0.0) ** (1.0 / power)
    return NormReport(
        family=family,
        param=param,
        value=float(value),
        argmax_center=tuple(float(c) for c in balls.center_points[j]),
        argmax_radius=float(balls.radii[i]),
        grid_n=grid.points_per_axis,
        time_nodes=len(time_grid),
        balls=balls.summary(),
        metadata={"tail_fraction": max(tails), "time_truncated": truncated},
    )


def _density(u: SpaceTimeField, power: float = 2.0) -> np.ndarray:
    sq = u.pointwise_sq()
    return sq if power == 2.0 else sq ** (0.5 * power)


def _balls(grid: PeriodicGrid, balls: BallFamily | None) -> BallFamily:
    if balls is None:
        return BallFamily.default(grid)
    if balls.grid != grid:
        raise ValueError("ball family was built for a different grid")
    return balls


def tent_T_norm(u: SpaceTimeField, beta: float, balls: BallFamily | None = None) -> NormReport:
    """``T^{inf,2}(t^beta dy dt)``: normalization ``r^{n + 2 beta - 4}``."""
    balls = _balls(u.grid, balls)
    wt = TentWeight(TentFamily.T, beta)
    return _tent_sup(
        _density(u), u.time_grid, balls, wt.time_exponent(), wt.radius_exponent(u.grid.dim),
        2.0, "T", beta,
    )


def tent_boldT_norm(u: SpaceTimeField, beta: float, balls: BallFamily | None = None) -> NormReport:
    """Gradient tent space: normalization ``r^{n + 2 beta - 2}``."""
    balls = _balls(u.grid, balls)
    wt = TentWeight(TentFamily.BOLD_T, beta)
    return _tent_sup(
        _density(u), u.time_grid, balls, wt.time_exponent(), wt.radius_exponent(u.grid.dim),
        2.0, "BoldT", beta,
    )


def classic_tent_norm(u: SpaceTimeField, p: float, balls: BallFamily | None = None) -> NormReport:
    if p < 1:
        raise ValueError(f"classic tent norm needs p >= 1, got {p}")
    balls = _balls(u.grid, balls)
    return _tent_sup(_density(u, p), u.time_grid, balls, 0.0, float(u.grid.dim), p, "ClassicT", p)


def _heat_gradient(f: Field, time_grid: TimeGrid) -> SpaceTimeField:
    flow = heat_flow(f, time_grid)
    return SpaceTimeField.from_spectral(
        time_grid, f.grid, gradient_spectral(flow.spectral, f.grid)
    )


def u_alpha_norm(
    f: Field,
    alpha: float,
    balls: BallFamily | None = None,
    time_nodes: int | None = None,
) -> NormReport:
    """``sup (r^{2 alpha + 2 - n} int_0^{r^2} int_B |grad e^{t Delta} f|^2 t^{-alpha})^{1/2}``.

    ``time_nodes`` overrides the default tent grid with a plain log grid of
    that many nodes.
    """
    if not -1.0 <= alpha <= 1.0:
        raise ValueError(f"u_alpha_norm needs alpha in [-1, 1], got {alpha}")
    grid = f.grid
    balls = _balls(grid, balls)
    tg = _norm_time_grid(grid, balls, time_nodes)
    rep = tent_boldT_norm(_heat_gradient(f, tg), -alpha, balls)
    rep.family, rep.param = "U", alpha
    return rep


def _norm_time_grid(grid, balls, time_nodes):
    if time_nodes is None:
        return tent_time_grid(grid, balls)
    from .grid import make_log_time_grid

    return make_log_time_grid(1e-2 * grid.spacing**2, float(balls.radii[0]) ** 2, time_nodes)


def bmo_minus1_norm(f: Field, balls: BallFamily | None = None, time_nodes: int | None = None) -> NormReport:
    """``sup (r^{-n} int_0^{r^2} int_B |e^{t Delta} f|^2 dy dt)^{1/2}``."""
    grid = f.grid
    balls = _balls(grid, balls)
    tg = _norm_time_grid(grid, balls, time_nodes)
    rep = classic_tent_norm(heat_flow(f, tg), 2.0, balls)
    rep.family, rep.param = "BMO-1", -1.0
    return rep


def _kernel_grid(grid: PeriodicGrid, alpha: float) -> np.ndarray:
    r = grid.distance_from((0.0,) * grid.dim)
    with np.errstate(divide="ignore"):
        K = np.where(r > 0, r ** (-(grid.dim + 2 * alpha)), 0.0)
    return K


def _template(grid: PeriodicGrid, offs: np.ndarray, w: np.ndarray) -> np.ndarray:
    W = np.zeros(grid.shape)
    idx = tuple((offs % grid.points_per_axis).T)
    np.add.at(W, idx, w)
    return W


def _diagonal_cell_constant(dim: int, alpha: float, h: float) -> float:
    """``int_{|z| < rho} (|z|^2 / n) |z|^{-n - 2 alpha} dz`` with ``|B(rho)| = h^n``."""
    if dim == 2:
        rho, area = h / math.sqrt(math.pi), 2 * math.pi
    else:
        rho, area = h * (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0), 4 * math.pi
    return area / dim * rho ** (2 - 2 * alpha) / (2 - 2 * alpha)


def v_alpha_norm(
    f: Field,
    alpha: float,
    balls: BallFamily | None = None,
    method: Literal["fft", "direct"] = "fft",
) -> NormReport:
    """Localized Slobodeckij norm ``sup (r^{2 alpha + 2 - n} iint_{B x B} |f(x)-f(y)|^2 / |x-y|^{n+2 alpha})^{1/2}``.

    The diagonal cell ``x = y`` is excluded. ``method="fft"`` evaluates the
    double sum per ball through periodic convolutions (exact for radii up to
    L/4); ``method="direct"`` runs the pairwise loop.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"v_alpha_norm needs alpha in (0, 1), got {alpha}")
    grid = f.grid
    balls = _balls(grid, balls)
    n, dim, h = grid.points_per_axis, grid.dim, grid.spacing
    dv = grid.cell_volume
    stack = f.stack
    expo = dim - 2 * alpha - 2
    grad_sq = _grad_sq(f)
    cell = _diagonal_cell_constant(dim, alpha, h)
    if method == "fft":
        Khat = grid.forward(_kernel_grid(grid, alpha))
    best, best_idx, best_missing = -1.0, (0, 0), 0.0
    for i, (r, (offs, w)) in enumerate(zip(balls.radii, balls.stencils)):
        if method == "fft":
            W0 = _template(grid, offs, w)
            WK0 = grid.inverse(grid.forward(W0) * Khat)
        for j, c in enumerate(balls.centers):
            shift = tuple(int(s) for s in c)
            if method == "fft":
                W = np.roll(W0, shift, axis=tuple(range(dim)))
                WK = np.roll(WK0, shift, axis=tuple(range(dim)))
                total = 0.0
                for comp in stack:
                    mean = np.sum(W * comp) / np.sum(W)
                    g = comp - mean
                    Wg = W * g
                    conv = grid.inverse(grid.forward(Wg) * Khat)
                    total += 2.0 * np.sum(W * g * g * WK) - 2.0 * np.sum(Wg * conv)
                total = max(total, 0.0) * dv * dv
            else:
                pos = (c[None, :] + offs) % n
                flat = np.ravel_multi_index(tuple(pos.T), grid.shape)
                coords = np.ascontiguousarray(offs * h, dtype=np.float64)
                total = 0.0
                for comp in stack:
                    vals = np.ascontiguousarray(comp.reshape(-1)[flat])
                    total += kernels.pair_difference_sum(vals, coords, w, float(alpha))
                total *= dv * dv
            val = total / r**expo
            if val > best:
                pos = (c[None, :] + offs) % n
                flat = np.ravel_multi_index(tuple(pos.T), grid.shape)
                missing = cell * dv * float(np.sum(w * grad_sq.reshape(-1)[flat]))
                best, best_idx, best_missing = val, (i, j), missing
    i, j = best_idx
    total_best = best * balls.radii[i] ** expo
    return NormReport(
        family="V",
        param=alpha,
        value=float(math.sqrt(max(best, 0.0))),
        argmax_center=tuple(float(x) for x in balls.center_points[j]),
        argmax_radius=float(balls.radii[i]),
        grid_n=n,
        time_nodes=0,
        balls=balls.summary(),
        metadata={
            "diagonal_mass_estimate": float(best_missing),
            "diagonal_fraction": float(best_missing / total_best) if total_best > 0 else 0.0,
            "method": method,
        },
    )


def _grad_sq(f: Field) -> np.ndarray:
    g = f.grid
    spec = f.spectral if isinstance(f, VectorField) else f.spectral[np.newaxis]
    out = np.zeros(g.shape)
    for k in g.odd_wavevectors:
        out += np.sum(g.inverse(1j * k * spec) ** 2, axis=0)
    return out


def _lq_heat(f: Field, spec: np.ndarray, t: float, q: str) -> float:
    g = f.grid
    damped = spec * np.exp(-t * g.k_squared)
    if q == "2":
        return float(np.sqrt(np.sum(g.spectral_l2_squared(damped))))
    vals = g.inverse(damped)
    return float(np.max(np.sqrt(np.sum(vals**2, axis=0))))


def besov_heatflow_norm(
    f: Field,
    s: float | None = None,
    flavor: Literal["inf_inf", "two_inf"] = "inf_inf",
    t_lo: float | None = None,
    t_hi: float | None = None,
    count: int = 48,
    warn: bool = True,
) -> float:
    """``sup_t t^{-s/2} ||e^{t Delta} f||_{L^q}`` over a log window of ``t``.

    ``inf_inf``: ``s = -1``, ``q = inf``. ``two_inf``: ``s = -1 + n/2``, ``q = 2``.
    The grid maximum is refined by a bounded scalar search in ``log t``.
    """
    g = f.grid
    n = g.dim
    expected = -1.0 if flavor == "inf_inf" else -1.0 + n / 2.0
    if flavor not in ("inf_inf", "two_inf"):
        raise ValueError(f"unknown flavor {flavor!r}")
    if s is None:
        s = expected
    if not math.isclose(s, expected):
        raise ValueError(f"flavor {flavor} is defined for s = {expected}, got {s}")
    q = "inf" if flavor == "inf_inf" else "2"
    spec = f.spectral if isinstance(f, VectorField) else f.spectral[np.newaxis]
    t_lo = 1e-2 * g.spacing**2 if t_lo is None else t_lo
    t_hi = g.side_length**2 if t_hi is None else t_hi
    logs = np.linspace(math.log(t_lo), math.log(t_hi), count)
    power = -0.5 * s

    def val(lt: float) -> float:
        t = math.exp(lt)
        return t**power * _lq_heat(f, spec, t, q)

    vals = np.array([val(lt) for lt in logs])
    k = int(np.argmax(vals))
    best = float(vals[k])
    if best <= 0:
        return 0.0
    if k in (0, count - 1):
        if warn:
            warnings.warn(
                f"Besov heat-flow sup attained at the window endpoint t={math.exp(logs[k]):.3g}",
                RuntimeWarning,
                stacklevel=2,
            )
        return best
    res = minimize_scalar(
        lambda lt: -val(lt),
        bounds=(logs[k - 1], logs[k + 1]),
        method="bounded",
        options={"xatol": 1e-6},
    )
    return max(best, float(-res.fun))


def sobolev_norm(f: Field, s: float) -> float:
    """``(sum_{xi != 0} |xi|^{2s} |f^(xi)|^2)^{1/2}`` with the discrete Parseval scaling."""
    g = f.grid
    spec = f.spectral if isinstance(f, VectorField) else f.spectral[np.newaxis]
    k2 = g.k_squared
    weight = np.zeros_like(k2)
    nz = k2 > 0
    weight[nz] = k2[nz] ** s
    return float(np.sqrt(np.sum(g.spectral_l2_squared(spec * np.sqrt(weight)))))


def e_alpha_norm(
    u: SpaceTimeField,
    alpha: float,
    balls: BallFamily | None = None,
    besov_stride: int = 1,
    dt_u: SpaceTimeField | None = None,
) -> EAlphaReport:
    """The five components of the ``E_alpha`` functional of a trajectory.

    ``dt_u`` may supply the time derivative; otherwise centered differences in
    ``t`` are used and their Richardson self-estimate is reported.
    """
    g = u.grid
    balls = _balls(g, balls)
    if dt_u is None:
        dt_u, rel_err = time_derivative(u)
    else:
        rel_err = 0.0
    lap = SpaceTimeField.from_spectral(u.time_grid, g, -g.k_squared * u.spectral)
    grad = SpaceTimeField.from_spectral(u.time_grid, g, gradient_spectral(u.spectral, g))
    dt_rep = tent_T_norm(dt_u, 1 - alpha, balls)
    lap_rep = tent_T_norm(lap, 1 - alpha, balls)
    grad_rep = tent_boldT_norm(grad, -alpha, balls)
    t = u.time_grid.nodes
    pointwise = np.sqrt(u.pointwise_sq()).reshape(len(t), -1).max(axis=1)
    sqrt_t_sup = float(np.max(np.sqrt(t) * pointwise))
    besov = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for m in range(0, len(t), max(1, besov_stride)):
            besov = max(besov, besov_heatflow_norm(u.slice(m), -1.0, "inf_inf", warn=False))
    return EAlphaReport(
        dt_norm=dt_rep.value,
        lap_norm=lap_rep.value,
        grad_norm=grad_rep.value,
        sqrt_t_sup=sqrt_t_sup,
        besov_sup=besov,
        dt_rel_error=float(rel_err),
        under_resolved=bool(rel_err > 0.05),
        time_truncated=bool(dt_rep.metadata["time_truncated"]),
    )
