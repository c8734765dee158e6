"""Seeded test-function families and named presets.

Samples are defined in the continuum (integer wavevectors, analytic
Gaussians) and only then evaluated on a grid, so one ensemble gives the same
functions at every resolution.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .grid import PeriodicGrid, ScalarField, SpaceTimeField, TimeGrid, VectorField
from .operators import heat_flow, leray_project

__all__ = [
    "EnsembleKind",
    "Ensemble",
    "PRESETS",
    "preset_velocity",
    "preset_scalar",
    "preset_density",
]


class EnsembleKind(str, enum.Enum):
    BAND_LIMITED_RANDOM = "band_limited_random"
    LOCALIZED_BUMPS = "localized_bumps"
    PLANE_WAVE_MIX = "plane_wave_mix"
    SLOBODECKIJ_ROUGH = "slobodeckij_rough"


def _wavevectors(dim: int, kmax: int) -> np.ndarray:
    """Integer wavevectors in a half space with ``1 <= |k| <= kmax``."""
    ax = np.arange(-kmax, kmax + 1)
    ks = np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), -1).reshape(-1, dim)
    norm2 = np.sum(ks**2, axis=1)
    keep = (norm2 >= 1) & (norm2 <= kmax * kmax)
    # one representative of each +-k pair
    first = np.array([next((c for c in k if c != 0), 0) for k in ks])
    return ks[keep & (first > 0)]


@dataclass(frozen=True)
class _Modes:
    k: np.ndarray  # integer wavevectors (count, dim), in units of 2 pi / L
    amp: np.ndarray
    phase: np.ndarray

    def evaluate(self, grid: PeriodicGrid) -> np.ndarray:
        base = 2 * np.pi / grid.side_length
        out = np.zeros(grid.shape)
        x = grid.coordinates
        for kv, a, p in zip(self.k, self.amp, self.phase):
            arg = sum(base * kc * xc for kc, xc in zip(kv, x)) + p
            out += a * np.cos(arg)
        return out


@dataclass(frozen=True)
class _Bumps:
    centers: np.ndarray  # fractions of L
    widths: np.ndarray  # fractions of L
    amps: np.ndarray

    def evaluate(self, grid: PeriodicGrid) -> np.ndarray:
        L = grid.side_length
        out = np.zeros(grid.shape)
        for c, s, a in zip(self.centers, self.widths, self.amps):
            d = grid.distance_from(tuple(c * L))
            out += a * np.exp(-0.5 * (d / (s * L)) ** 2)
        return out - out.mean()


@dataclass(frozen=True)
class Ensemble:
    """Reproducible family of ``size`` samples of one kind."""

    seed: int
    kind: EnsembleKind
    size: int = 50
    dim: int = 2
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", EnsembleKind(self.kind))
        if self.size < 1:
            raise ValueError("ensemble size must be >= 1")
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")

    def _rng(self, index: int, stream: int = 0) -> np.random.Generator:
        kinds = list(EnsembleKind)
        return np.random.default_rng([self.seed, kinds.index(self.kind), index, stream])

    def _spec(self, index: int, stream: int = 0):
        rng = self._rng(index, stream)
        dim, p = self.dim, self.params
        if self.kind is EnsembleKind.BAND_LIMITED_RANDOM:
            kmax = int(p.get("kmax", 6))
            ks = _wavevectors(dim, kmax)
            decay = np.sqrt(np.sum(ks**2, axis=1)) ** -float(p.get("decay", 1.0))
            amp = decay * rng.standard_normal(len(ks))
            return _Modes(ks, amp, rng.uniform(0, 2 * np.pi, len(ks)))
        if self.kind is EnsembleKind.PLANE_WAVE_MIX:
            kmax = int(p.get("kmax", 8))
            ks_all = _wavevectors(dim, kmax)
            count = int(rng.integers(1, 5))
            pick = rng.choice(len(ks_all), size=count, replace=False)
            return _Modes(ks_all[pick], rng.uniform(0.5, 1.5, count), rng.uniform(0, 2 * np.pi, count))
        if self.kind is EnsembleKind.SLOBODECKIJ_ROUGH:
            kmax = int(p.get("kmax", 16))
            rough = float(p.get("roughness", 0.75))
            ks = _wavevectors(dim, kmax)
            mag = np.sqrt(np.sum(ks**2, axis=1))
            amp = mag ** -(0.5 * dim + rough) * rng.standard_normal(len(ks))
            return _Modes(ks, amp, rng.uniform(0, 2 * np.pi, len(ks)))
        count = int(rng.integers(1, 4))
        lo, hi = p.get("width_range", (0.03, 0.08))
        return _Bumps(
            rng.uniform(0, 1, (count, dim)),
            rng.uniform(lo, hi, count),
            rng.choice([-1.0, 1.0], count) * rng.uniform(0.5, 1.5, count),
        )

    def scalar(self, grid: PeriodicGrid, index: int, stream: int = 0) -> ScalarField:
        if grid.dim != self.dim:
            raise ValueError("grid dimension differs from the ensemble's")
        return ScalarField(grid, self._spec(index, stream).evaluate(grid))

    def scalar_samples(self, grid: PeriodicGrid) -> list[ScalarField]:
        return [self.scalar(grid, i) for i in range(self.size)]

    def vector(self, grid: PeriodicGrid, index: int, solenoidal: bool = False) -> VectorField:
        comps = np.stack([self.scalar(grid, index, stream=c + 1).values for c in range(self.dim)])
        u = VectorField(grid, comps)
        return leray_project(u) if solenoidal else u

    def vector_samples(self, grid: PeriodicGrid, solenoidal: bool = False) -> list[VectorField]:
        return [self.vector(grid, i, solenoidal) for i in range(self.size)]

    def spacetime(self, grid: PeriodicGrid, time_grid: TimeGrid, index: int,
                  vector: bool = False) -> SpaceTimeField:
        """Space-time sample: time-constant, heat flow, or a ramped profile (by index)."""
        f = self.vector(grid, index) if vector else self.scalar(grid, index)
        shape = index % 3
        if shape == 1:
            return heat_flow(f, time_grid)
        stack = f.stack
        t = time_grid.nodes
        if shape == 0:
            prof = np.ones_like(t)
        else:
            tau = float(self._rng(index, 99).uniform(0.01, 1.0)) * time_grid.t_max
            prof = t / (t + tau)
        vals = prof.reshape((-1,) + (1,) * (grid.dim + 1)) * stack[np.newaxis]
        return SpaceTimeField(time_grid, grid, vals)


def _single_mode(grid: PeriodicGrid) -> np.ndarray:
    x = grid.coordinates
    base = 2 * np.pi / grid.side_length
    u = np.zeros((grid.dim,) + grid.shape)
    u[0] = np.sin(base * x[1])
    return u


def _taylor_green(grid: PeriodicGrid) -> np.ndarray:
    x = grid.coordinates
    b = 2 * np.pi / grid.side_length
    u = np.zeros((grid.dim,) + grid.shape)
    u[0] = np.sin(b * x[0]) * np.cos(b * x[1])
    u[1] = -np.cos(b * x[0]) * np.sin(b * x[1])
    return u


def _bump_field(grid: PeriodicGrid) -> np.ndarray:
    L = grid.side_length
    d = grid.distance_from((0.5 * L,) * grid.dim)
    return np.exp(-0.5 * (d / (0.08 * L)) ** 2)


def _bump_velocity(grid: PeriodicGrid) -> np.ndarray:
    # rotational bump: perpendicular gradient of a Gaussian
    from .operators import gradient

    g = gradient(ScalarField(grid, _bump_field(grid))).values
    u = np.zeros((grid.dim,) + grid.shape)
    u[0], u[1] = -g[1], g[0]
    return u


def _rough(grid: PeriodicGrid) -> np.ndarray:
    ens = Ensemble(seed=0, kind=EnsembleKind.SLOBODECKIJ_ROUGH, size=1, dim=grid.dim)
    return np.stack([ens.scalar(grid, 0, stream=c + 1).values for c in range(grid.dim)])


PRESETS = {
    "zero": lambda g: np.zeros((g.dim,) + g.shape),
    "single-mode": _single_mode,
    "taylor-green": _taylor_green,
    "bump": _bump_velocity,
    "rough": _rough,
}


def preset_velocity(name: str, grid: PeriodicGrid) -> VectorField:
    """Divergence-free preset velocity on ``grid``."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return leray_project(VectorField(grid, PRESETS[name](grid)))


def preset_scalar(name: str, grid: PeriodicGrid) -> ScalarField:
    """Scalar version of a preset (the bump is the Gaussian itself)."""
    if name == "bump":
        return ScalarField(grid, _bump_field(grid))
    return ScalarField(grid, preset_velocity(name, grid).values[0])


def preset_density(grid: PeriodicGrid, deviation: float, seed: int = 0) -> ScalarField:
    """``1 + deviation * s(x)`` with a smooth ``s`` normalized to ``max|s| = 1``."""
    if deviation == 0:
        return ScalarField(grid, np.ones(grid.shape))
    x = grid.coordinates
    b = 2 * np.pi / grid.side_length
    rng = np.random.default_rng(seed)
    ph = rng.uniform(0, 2 * np.pi, 2)
    s = np.cos(b * x[0] + ph[0]) * np.cos(b * x[1] + ph[1]) + 0.5 * np.sin(2 * b * x[0] + ph[1])
    s = s / np.max(np.abs(s))
    return ScalarField(grid, 1.0 + deviation * s)
