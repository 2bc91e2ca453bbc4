"""Periodic grids, unitary Fourier transforms and the basic spectral operators.

Every spectral array in the package uses the unitary ("ortho") FFT
normalization, so ``sum |f|^2 == sum |f_hat|^2`` and the continuum L2 norm
is ``sqrt(cell_volume * sum |f_hat|^2)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "SpectralField",
    "HomogeneityError",
    "make_grid",
    "forward",
    "inverse",
    "fractional_laplacian",
    "project",
    "gradient",
    "divergence",
    "l2_norm",
    "dealias",
]


class HomogeneityError(ValueError):
    """A negative-order homogeneous operator met a field with nonzero mean."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class Grid:
    """Periodic box [0, L)^d sampled with n points per axis."""

    dim: int
    n: int
    box_length: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if not isinstance(self.n, (int, np.integer)) or not _is_power_of_two(int(self.n)) or self.n < 8:
            raise ValueError(f"points per axis must be a power of two >= 8, got {self.n}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def half_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.dim - 1) + (self.n // 2 + 1,)

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    @property
    def k0(self) -> float:
        """Lattice spacing 2*pi/L (smallest nonzero |xi|)."""
        return 2.0 * np.pi / self.box_length

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    def compatible(self, other: "Grid") -> bool:
        return (self.dim, self.n, self.box_length) == (other.dim, other.n, other.box_length)

    def integer_modes(self) -> np.ndarray:
        """Per-axis integer frequencies in FFT order, -n/2 .. n/2-1."""
        return np.fft.fftfreq(self.n, 1.0 / self.n).astype(np.int64)

    def _lattice(self, half: bool):
        ints = self.integer_modes()
        last = np.arange(self.n // 2 + 1) if half else ints
        per_axis = [ints] * (self.dim - 1) + [last]
        return np.meshgrid(*per_axis, indexing="ij", sparse=True)

    def _wavevectors(self, half: bool, odd: bool):
        out = []
        for kk in self._lattice(half):
            kk = kk.astype(float)
            if odd:
                kk = np.where(np.abs(kk) == self.n // 2, 0.0, kk)
            out.append(self.k0 * kk)
        return tuple(out)

    @cached_property
    def wavevectors(self) -> tuple[np.ndarray, ...]:
        """Broadcastable per-axis wavenumbers 2*pi*k/L on the full lattice."""
        return self._wavevectors(half=False, odd=False)

    @cached_property
    def odd_wavevectors(self) -> tuple[np.ndarray, ...]:
        """Wavenumbers with the Nyquist component zeroed, for odd derivatives."""
        return self._wavevectors(half=False, odd=True)

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(sum(k**2 for k in self.wavevectors))

    @cached_property
    def half_wavevectors(self) -> tuple[np.ndarray, ...]:
        return self._wavevectors(half=True, odd=False)

    @cached_property
    def half_odd_wavevectors(self) -> tuple[np.ndarray, ...]:
        return self._wavevectors(half=True, odd=True)

    @cached_property
    def half_kmag(self) -> np.ndarray:
        return np.sqrt(sum(k**2 for k in self.half_wavevectors))

    @cached_property
    def half_multiplicity(self) -> np.ndarray:
        """How many full-lattice modes each half-lattice mode stands for."""
        mult = np.full(self.n // 2 + 1, 2.0)
        mult[0] = 1.0
        mult[-1] = 1.0
        return mult.reshape((1,) * (self.dim - 1) + (-1,))

    def dealias_mask(self, half: bool = False) -> np.ndarray:
        """Orszag 2/3 rule: keep |k_i| <= n/3 along every axis."""
        cut = self.n // 3
        mask = np.ones(self.half_shape if half else self.shape, dtype=bool)
        for kk in self._lattice(half):
            mask &= np.abs(kk) <= cut
        return mask

    def coordinates(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.n) * self.dx
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    # real-to-complex transforms used by the time stepper
    def rfft(self, samples: np.ndarray) -> np.ndarray:
        return sfft.rfftn(samples, axes=self.axes, norm="ortho")

    def irfft(self, coeffs: np.ndarray) -> np.ndarray:
        return sfft.irfftn(coeffs, s=self.shape, axes=self.axes, norm="ortho")

    def describe(self) -> dict:
        return {"dim": self.dim, "n": self.n, "box_length": self.box_length}


def make_grid(dim: int, n: int, box_length: float) -> Grid:
    return Grid(int(dim), int(n), float(box_length))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a scalar (components=1) or vector field."""

    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients)
        if c.shape[1:] != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "coefficients", c.astype(complex, copy=False))

    @property
    def components(self) -> int:
        return self.coefficients.shape[0]

    @property
    def mean(self) -> np.ndarray:
        """Physical-space mean per component."""
        zero = (slice(None),) + (0,) * self.grid.dim
        return self.coefficients[zero] / np.sqrt(np.prod(self.grid.shape))

    def component(self, i: int) -> "SpectralField":
        return SpectralField(self.grid, self.coefficients[i : i + 1])

    def with_coefficients(self, coeffs) -> "SpectralField":
        return SpectralField(self.grid, coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return self.with_coefficients(self.coefficients + other.coefficients)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return self.with_coefficients(self.coefficients - other.coefficients)

    def __mul__(self, scalar) -> "SpectralField":
        return self.with_coefficients(self.coefficients * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return self.with_coefficients(-self.coefficients)

    @classmethod
    def zeros(cls, grid: Grid, components: int = 1) -> "SpectralField":
        return cls(grid, np.zeros((components,) + grid.shape, dtype=complex))


def forward(samples, grid: Grid) -> SpectralField:
    """Unitary FFT of physical samples of shape ``grid.shape`` or ``(c, *grid.shape)``."""
    x = np.asarray(samples)
    if x.shape == grid.shape:
        x = x[None]
    if x.shape[1:] != grid.shape:
        raise ValueError(f"sample shape {np.shape(samples)} does not match grid {grid.shape}")
    return SpectralField(grid, sfft.fftn(x, axes=grid.axes, norm="ortho"))


def inverse(field: SpectralField, real: bool = True) -> np.ndarray:
    """Physical samples of shape ``(components, *grid.shape)``."""
    x = sfft.ifftn(field.coefficients, axes=field.grid.axes, norm="ortho")
    return x.real if real else x


def l2_norm(field: SpectralField) -> float:
    """Continuum L2 norm over the box (all components)."""
    c = field.coefficients
    return float(np.sqrt(field.grid.cell_volume * np.sum(c.real**2 + c.imag**2)))


def _zero_index(grid: Grid):
    return (slice(None),) + (0,) * grid.dim


def fractional_laplacian(u: SpectralField, s: float) -> SpectralField:
    """Lambda^s = (-Delta)^{s/2}: multiply by |xi|^s, dropping the zero mode."""
    grid = u.grid
    zero = _zero_index(grid)
    if s < 0:
        scale = np.sqrt(np.sum(np.abs(u.coefficients) ** 2))
        if np.any(np.abs(u.coefficients[zero]) > 1e-12 * max(scale, 1e-300)):
            raise HomogeneityError(
                f"Lambda^{s} is singular at xi = 0; the field must have zero mean "
                "(homogeneous operators act on mean-free data only)"
            )
    k = grid.kmag.copy()
    k.flat[0] = 1.0
    mult = k**s
    mult.flat[0] = 0.0
    return u.with_coefficients(u.coefficients * mult)


def gradient(u: SpectralField) -> SpectralField:
    if u.components != 1:
        raise ValueError("gradient expects a scalar field")
    return u.with_coefficients(np.stack([1j * k * u.coefficients[0] for k in _full_odd(u.grid)]))


def divergence(m: SpectralField) -> SpectralField:
    if m.components != m.grid.dim:
        raise ValueError(f"divergence expects {m.grid.dim} components, got {m.components}")
    ks = _full_odd(m.grid)
    return m.with_coefficients(sum(1j * ks[i] * m.coefficients[i] for i in range(m.grid.dim))[None])


def _full_odd(grid: Grid):
    return [np.broadcast_to(k, grid.shape) for k in grid.odd_wavevectors]


def _unit_directions(ks):
    """Unit vectors xi/|xi| built from odd wavevectors; zero where |xi| = 0."""
    mag = np.sqrt(sum(k**2 for k in ks))
    safe = np.where(mag > 0, mag, 1.0)
    return [np.where(mag > 0, k / safe, 0.0) for k in ks], mag


def project(m: SpectralField) -> tuple[SpectralField, SpectralField]:
    """Split momentum into (w, v): w divergence-free, v = Lambda^{-1} div m.

    The compressible part is recovered as ``m - w = F^{-1}[-i (xi/|xi|) v_hat]``.
    Modes without a direction (the zero mode) go entirely to w.
    """
    grid = m.grid
    if m.components != grid.dim:
        raise ValueError(f"project expects {grid.dim} components, got {m.components}")
    e, _ = _unit_directions(_full_odd(grid))
    v_hat = 1j * sum(e[i] * m.coefficients[i] for i in range(grid.dim))
    w_hat = np.stack([m.coefficients[i] + 1j * e[i] * v_hat for i in range(grid.dim)])
    return SpectralField(grid, w_hat), SpectralField(grid, v_hat[None])


def compressible_part(v: SpectralField) -> SpectralField:
    """Inverse of the v-map: the potential vector field carried by v."""
    grid = v.grid
    e, _ = _unit_directions(_full_odd(grid))
    return SpectralField(grid, np.stack([-1j * e[i] * v.coefficients[0] for i in range(grid.dim)]))


def dealias(u: SpectralField) -> SpectralField:
    return u.with_coefficients(u.coefficients * u.grid.dealias_mask())
