"""Periodic grids, fields with physical/spectral views, and time grids.

The whole space R^n is replaced by the torus [0, L)^n. Spectral views use the
real FFT (``numpy.fft.rfftn``) with numpy's default normalization, so the
spectral array has shape ``(N, ..., N, N // 2 + 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "PeriodicGrid",
    "ScalarField",
    "VectorField",
    "TimeGrid",
    "SpaceTimeField",
    "make_log_time_grid",
    "resample",
]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid on the torus ``[0, side_length)^dim``."""

    dim: int = 2
    side_length: float = 2.0 * np.pi
    points_per_axis: int = 64

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if not (self.side_length > 0 and np.isfinite(self.side_length)):
            raise ValueError(f"side_length must be positive, got {self.side_length}")
        if not _is_power_of_two(int(self.points_per_axis)) or self.points_per_axis < 4:
            raise ValueError(
                f"points_per_axis must be a power of two >= 4, got {self.points_per_axis}"
            )
        object.__setattr__(self, "side_length", float(self.side_length))
        object.__setattr__(self, "points_per_axis", int(self.points_per_axis))

    @property
    def n(self) -> int:
        return self.points_per_axis

    @property
    def spacing(self) -> float:
        return self.side_length / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * (self.dim - 1) + (self.points_per_axis // 2 + 1,)

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    def scaled(self, side_length: float | None = None, points_per_axis: int | None = None):
        return PeriodicGrid(
            self.dim,
            self.side_length if side_length is None else side_length,
            self.points_per_axis if points_per_axis is None else points_per_axis,
        )

    # -- coordinates -----------------------------------------------------

    @cached_property
    def axis(self) -> np.ndarray:
        return _frozen(np.arange(self.points_per_axis) * self.spacing)

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Physical coordinates, one broadcastable array per axis."""
        out = []
        for d in range(self.dim):
            shp = [1] * self.dim
            shp[d] = self.points_per_axis
            out.append(_frozen(self.axis.reshape(shp).copy()))
        return tuple(out)

    def minimal_image(self, offsets: np.ndarray) -> np.ndarray:
        """Map displacements to the periodic representative in [-L/2, L/2)."""
        L = self.side_length
        return (np.asarray(offsets) + 0.5 * L) % L - 0.5 * L

    def distance_from(self, point: Sequence[float]) -> np.ndarray:
        """Periodic distance of every grid point to ``point``."""
        r2 = np.zeros(self.shape)
        for d, c in enumerate(self.coordinates):
            r2 = r2 + self.minimal_image(c - point[d]) ** 2
        return np.sqrt(r2)

    # -- wavenumbers -----------------------------------------------------

    @cached_property
    def wavevectors(self) -> tuple[np.ndarray, ...]:
        """Angular wavenumbers on the rfft layout, broadcastable per axis."""
        N, L = self.points_per_axis, self.side_length
        full = np.fft.fftfreq(N, d=1.0 / N) * (2.0 * np.pi / L)
        half = np.fft.rfftfreq(N, d=1.0 / N) * (2.0 * np.pi / L)
        out = []
        for d in range(self.dim):
            shp = [1] * self.dim
            k = half if d == self.dim - 1 else full
            shp[d] = k.size
            out.append(_frozen(k.reshape(shp).copy()))
        return tuple(out)

    @cached_property
    def odd_wavevectors(self) -> tuple[np.ndarray, ...]:
        """Wavenumbers for odd symbols (derivatives, Riesz, Leray): Nyquist set to 0.

        A real grid function cannot carry the sine half of the Nyquist mode, so
        odd multipliers annihilate it.
        """
        N = self.points_per_axis
        out = []
        for k in self.wavevectors:
            k = k.copy()
            flat = k.reshape(-1)
            nyq = np.isclose(np.abs(flat), np.pi * N / self.side_length)
            flat[nyq] = 0.0
            out.append(_frozen(k))
        return tuple(out)

    @cached_property
    def k_squared(self) -> np.ndarray:
        k2 = np.zeros(self.spectral_shape)
        for k in self.wavevectors:
            k2 = k2 + k**2
        return _frozen(k2)

    @cached_property
    def odd_k_squared(self) -> np.ndarray:
        k2 = np.zeros(self.spectral_shape)
        for k in self.odd_wavevectors:
            k2 = k2 + k**2
        return _frozen(k2)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on modes that touch the Nyquist frequency along any axis."""
        mask = np.zeros(self.spectral_shape, dtype=bool)
        for k, ko in zip(self.wavevectors, self.odd_wavevectors):
            mask = mask | ((k != ko) & np.ones(self.spectral_shape, dtype=bool))
        return _frozen(mask)

    @cached_property
    def hermitian_weights(self) -> np.ndarray:
        """Multiplicity of each rfft coefficient in the full spectrum."""
        N = self.points_per_axis
        w = np.full(self.spectral_shape, 2.0)
        w[..., 0] = 1.0
        if N % 2 == 0:
            w[..., N // 2] = 1.0
        return _frozen(w)

    def dealias_mask(self, fraction: float = 2.0 / 3.0) -> np.ndarray:
        """Keep modes with |k_d| < fraction * k_max on every axis."""
        N, L = self.points_per_axis, self.side_length
        kmax = np.pi * N / L
        mask = np.ones(self.spectral_shape, dtype=bool)
        for k in self.wavevectors:
            mask = mask & (np.abs(k) < fraction * kmax)
        return mask

    # -- transforms ------------------------------------------------------

    def forward(self, values: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        return np.fft.rfftn(values, axes=axes)

    def inverse(self, spectrum: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        return np.fft.irfftn(spectrum, s=self.shape, axes=axes)

    def spectral_l2_squared(self, spectrum: np.ndarray) -> np.ndarray:
        """Discrete L^2 norm squared computed from rfft coefficients (last dims)."""
        axes = tuple(range(-self.dim, 0))
        scale = self.cell_volume / self.size
        return scale * np.sum(self.hermitian_weights * np.abs(spectrum) ** 2, axis=axes)


class _FieldBase:
    grid: PeriodicGrid
    values: np.ndarray

    @property
    def stack(self) -> np.ndarray:
        """Values with a leading component axis."""
        raise NotImplementedError

    @cached_property
    def spectral(self) -> np.ndarray:
        return _frozen(self.grid.forward(self.values))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.cell_volume * np.sum(self.values**2)))

    def _check(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")


@dataclass(frozen=True, eq=False)
class ScalarField(_FieldBase):
    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {v.shape}")
        object.__setattr__(self, "values", _frozen(v))
        self._check()

    @classmethod
    def from_function(cls, grid: PeriodicGrid, fn: Callable[..., np.ndarray]) -> "ScalarField":
        return cls(grid, np.broadcast_to(fn(*grid.coordinates), grid.shape))

    @classmethod
    def from_spectral(cls, grid: PeriodicGrid, spectrum: np.ndarray) -> "ScalarField":
        return cls(grid, grid.inverse(spectrum))

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @property
    def stack(self) -> np.ndarray:
        return self.values[np.newaxis]

    def mean(self) -> float:
        return float(np.mean(self.values))

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _vals(other))

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * _vals(c))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class VectorField(_FieldBase):
    """``dim`` components on one grid, stored as an array ``(dim, N, ..., N)``."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        expected = (self.grid.dim,) + self.grid.shape
        if v.shape != expected:
            raise ValueError(f"expected shape {expected}, got {v.shape}")
        object.__setattr__(self, "values", _frozen(v))
        self._check()

    @classmethod
    def from_components(cls, components: Sequence[ScalarField]) -> "VectorField":
        grid = components[0].grid
        if any(c.grid is not grid and c.grid != grid for c in components):
            raise ValueError("components must share one grid")
        return cls(grid, np.stack([c.values for c in components]))

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> "VectorField":
        return cls(grid, np.zeros((grid.dim,) + grid.shape))

    @property
    def components(self) -> tuple[ScalarField, ...]:
        return tuple(ScalarField(self.grid, c) for c in self.values)

    @property
    def stack(self) -> np.ndarray:
        return self.values

    def pointwise_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values**2, axis=0))

    def max_abs(self) -> float:
        return float(np.max(self.pointwise_norm()))

    def mean(self) -> np.ndarray:
        return np.mean(self.values, axis=tuple(range(1, self.grid.dim + 1)))

    def __add__(self, other):
        return VectorField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return VectorField(self.grid, self.values - _vals(other))

    def __mul__(self, c):
        return VectorField(self.grid, self.values * _vals(c))

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField(self.grid, -self.values)


Field = Union[ScalarField, VectorField]


def _vals(x):
    return x.values if isinstance(x, _FieldBase) else x


def field_from_stack(grid: PeriodicGrid, stack: np.ndarray, like: Field | None = None):
    """Rebuild a field from a component stack ``(C, N, ..., N)``."""
    stack = np.asarray(stack)
    if like is not None:
        return ScalarField(grid, stack[0]) if isinstance(like, ScalarField) else VectorField(grid, stack)
    if stack.shape[0] == 1:
        return ScalarField(grid, stack[0])
    if stack.shape[0] == grid.dim:
        return VectorField(grid, stack)
    raise ValueError(f"cannot build a field from {stack.shape[0]} components")


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing positive time nodes with quadrature weights.

    Each node owns the log-scale dual cell between its geometric midpoints
    with its neighbours (clipped at the first and last node).
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        t = np.array(self.nodes, dtype=np.float64).reshape(-1)
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if t.size < 2:
            raise ValueError("a time grid needs at least two nodes")
        if w.shape != t.shape:
            raise ValueError("nodes and weights must have equal length")
        if not np.all(t > 0):
            raise ValueError("time nodes must be strictly positive")
        if not np.all(np.diff(t) > 0):
            raise ValueError("time nodes must be strictly increasing")
        if not np.all(w > 0):
            raise ValueError("quadrature weights must be positive")
        object.__setattr__(self, "nodes", _frozen(t))
        object.__setattr__(self, "weights", _frozen(w))

    def __len__(self) -> int:
        return self.nodes.size

    @property
    def t_min(self) -> float:
        return float(self.nodes[0])

    @property
    def t_max(self) -> float:
        return float(self.nodes[-1])

    @cached_property
    def log_edges(self) -> np.ndarray:
        s = np.log(self.nodes)
        mid = 0.5 * (s[1:] + s[:-1])
        return _frozen(np.concatenate([[s[0]], mid, [s[-1]]]))

    def is_log_uniform(self, rtol: float = 1e-10) -> bool:
        q = self.nodes[1:] / self.nodes[:-1]
        return bool(np.all(np.abs(q / q[0] - 1.0) < rtol))

    def weights_upto(self, t_end: float) -> np.ndarray:
        """Weights for integrating over ``[t_1, min(t_end, t_M)]``."""
        if t_end >= self.t_max:
            return self.weights.copy()
        e = self.log_edges
        s_end = np.log(t_end)
        full = e[1:] - e[:-1]
        part = np.clip(np.minimum(e[1:], s_end) - e[:-1], 0.0, None)
        frac = np.divide(part, full, out=np.zeros_like(part), where=full > 0)
        return self.weights * frac

    def integrate(self, samples: np.ndarray, t_end: float | None = None) -> np.ndarray:
        w = self.weights if t_end is None else self.weights_upto(t_end)
        return np.tensordot(w, np.asarray(samples), axes=(0, 0))


def make_log_time_grid(t_min: float, t_max: float, count: int) -> TimeGrid:
    """Log-uniform nodes from ``t_min`` to ``t_max`` inclusive.

    Weights are the midpoint rule in ``s = log t`` with cells clipped to the
    range, i.e. ``w_i = t_i * ds`` and half that at both ends.
    """
    if not (t_min > 0):
        raise ValueError(f"t_min must be > 0 (got {t_min}); singular weights are not integrable at 0")
    if not (t_max > t_min):
        raise ValueError(f"empty time range: t_min={t_min}, t_max={t_max}")
    if count < 2:
        raise ValueError("count must be >= 2")
    s = np.linspace(np.log(t_min), np.log(t_max), count)
    t = np.exp(s)
    t[0], t[-1] = t_min, t_max
    ds = s[1] - s[0]
    w = t * ds
    w[0] *= 0.5
    w[-1] *= 0.5
    return TimeGrid(t, w)


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Samples ``u(., t_m)`` stored as an array ``(M, C, N, ..., N)``.

    ``C`` is 1 for scalars, ``dim`` for vector fields and ``dim**2`` for
    gradients of vector fields.
    """

    time_grid: TimeGrid
    grid: PeriodicGrid
    values: np.ndarray
    spectral_cache: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != self.grid.dim + 2:
            raise ValueError(f"expected (M, C) + {self.grid.shape}, got {v.shape}")
        if v.shape[0] != len(self.time_grid):
            raise ValueError(
                f"slice count {v.shape[0]} differs from node count {len(self.time_grid)}"
            )
        if v.shape[2:] != self.grid.shape:
            raise ValueError("slices do not match the grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("space-time field contains non-finite values")
        if not v.flags.owndata:
            v = v.copy()
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def from_slices(cls, time_grid: TimeGrid, slices: Sequence[Field]) -> "SpaceTimeField":
        grid = slices[0].grid
        if any(s.grid != grid for s in slices):
            raise ValueError("all slices must share one grid")
        return cls(time_grid, grid, np.stack([s.stack for s in slices]))

    @classmethod
    def from_spectral(cls, time_grid: TimeGrid, grid: PeriodicGrid, spectrum: np.ndarray):
        return cls(time_grid, grid, grid.inverse(spectrum), spectral_cache=spectrum)

    @property
    def n_components(self) -> int:
        return self.values.shape[1]

    @property
    def slices(self) -> list:
        if self.n_components in (1, self.grid.dim):
            return [field_from_stack(self.grid, s) for s in self.values]
        return [s for s in self.values]

    def slice(self, m: int):
        return field_from_stack(self.grid, self.values[m])

    @cached_property
    def spectral(self) -> np.ndarray:
        if self.spectral_cache is not None:
            return self.spectral_cache
        return _frozen(self.grid.forward(self.values))

    def pointwise_sq(self) -> np.ndarray:
        """``|u(y, t_m)|^2`` summed over components, shape ``(M, N, ..., N)``."""
        return np.sum(self.values**2, axis=1)

    def with_values(self, values: np.ndarray) -> "SpaceTimeField":
        return SpaceTimeField(self.time_grid, self.grid, values)

    def __add__(self, other: "SpaceTimeField"):
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "SpaceTimeField"):
        return self.with_values(self.values - other.values)

    def __mul__(self, c: float):
        return self.with_values(self.values * c)

    __rmul__ = __mul__


def _resize_axis(spec: np.ndarray, axis: int, n_new: int) -> np.ndarray:
    """Zero-pad or truncate a full (fftn-layout) spectrum along one axis."""
    n_old = spec.shape[axis]
    if n_new == n_old:
        return spec
    spec = np.moveaxis(spec, axis, 0)
    out = np.zeros((n_new,) + spec.shape[1:], dtype=complex)
    m = min(n_old, n_new) // 2
    out[:m] = spec[:m]
    out[n_new - m + 1 :] = spec[n_old - m + 1 :]
    if n_new > n_old:
        # split the source Nyquist coefficient over +-m
        out[m] = 0.5 * spec[m]
        out[n_new - m] = 0.5 * spec[m]
    else:
        # fold +-m onto the new Nyquist, matching point sampling
        out[m] = spec[m] + spec[n_old - m]
    return np.moveaxis(out, 0, axis)


def resample(f: Field, target: PeriodicGrid) -> Field:
    """Spectral interpolation of ``f`` onto ``target``.

    Only the point count matters for the values; the physical side length of
    ``target`` may differ from the source (the caller rescales the domain).
    """
    src = f.grid
    if target.dim != src.dim:
        raise ValueError("resample cannot change the dimension")
    stack = f.stack
    if target.points_per_axis == src.points_per_axis:
        return field_from_stack(target, stack.copy(), like=f)
    axes = tuple(range(1, src.dim + 1))
    spec = np.fft.fftn(stack, axes=axes)
    for ax in axes:
        spec = _resize_axis(spec, ax, target.points_per_axis)
    ratio = (target.points_per_axis / src.points_per_axis) ** src.dim
    out = np.real(np.fft.ifftn(spec * ratio, axes=axes))
    return field_from_stack(target, out, like=f)
