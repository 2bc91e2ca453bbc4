"""Homogeneous Littlewood-Paley blocks, Besov / Chemin-Lerner norms, Bony paraproducts.

The dyadic bump is built by telescoping a smooth cutoff in log2|xi|, so on
the lattice every nonzero mode lives in at most two neighbouring shells and
the two weights add to one exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid

from .spectral_core import Grid, SpectralField, forward, inverse

__all__ = [
    "smooth_cutoff",
    "DyadicFilterBank",
    "BesovReport",
    "ShellTrace",
    "build_filters",
    "lp_block",
    "besov_norm",
    "split_low_high",
    "chemin_lerner_norm",
    "bony_decompose",
    "paraproduct_term",
    "dealiased_product",
    "product_inequality_probe",
    "product_ratio",
    "random_band_field",
]


def smooth_cutoff(y):
    """C-infinity step: 0 for y <= 0, 1 for y >= 1."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
        b = np.where(y < 1, np.exp(-1.0 / np.where(y < 1, 1.0 - y, 1.0)), 0.0)
    return np.where(y <= 0, 0.0, np.where(y >= 1, 1.0, a / (a + b)))


def _norm_sigma(sigma):
    if sigma in (np.inf, "inf", "infinity", float("inf")):
        return np.inf
    if sigma in (1, 1.0, "1"):
        return 1
    raise ValueError(f"summation index must be 1 or inf, got {sigma!r}")


@dataclass(frozen=True)
class _ShellIndex:
    jlo: np.ndarray  # lower shell index per mode (int); zero mode flagged by -1 in `valid`
    wlo: np.ndarray  # weight of shell jlo; shell jlo+1 carries 1 - wlo
    valid: np.ndarray


def _shell_index(kmag: np.ndarray) -> _ShellIndex:
    valid = kmag > 0
    x = np.log2(np.where(valid, kmag, 1.0))
    jlo = np.floor(x).astype(np.int64)
    wlo = np.where(valid, smooth_cutoff(jlo + 1 - x), 0.0)
    return _ShellIndex(jlo=jlo, wlo=wlo, valid=valid)


class DyadicFilterBank:
    """phi_j(xi) = Phi(2^-j xi) restricted to the shells present on a grid."""

    def __init__(self, grid: Grid):
        self.grid = grid
        idx = self._full
        jl = idx.jlo[idx.valid]
        wl = idx.wlo[idx.valid]
        present = np.concatenate([jl[wl > 0], jl[wl < 1] + 1])
        j_min, j_max = int(present.min()), int(present.max())
        self.j_min, self.j_max = j_min, j_max
        if j_max - j_min + 1 < 3:
            raise ValueError(
                f"grid hosts only {j_max - j_min + 1} dyadic shells; at least 3 are needed"
            )

    @cached_property
    def _full(self) -> _ShellIndex:
        return _shell_index(self.grid.kmag)

    @cached_property
    def _half(self) -> _ShellIndex:
        return _shell_index(self.grid.half_kmag)

    @property
    def j_range(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1)

    @property
    def band(self) -> tuple[float, float]:
        """Resolved frequency band (smallest nonzero |xi|, largest |xi|)."""
        k = self.grid.kmag
        return float(k[k > 0].min()), float(k.max())

    def weight(self, j: int, half: bool = False) -> np.ndarray:
        """phi_j on the lattice."""
        idx = self._half if half else self._full
        w = np.where(idx.jlo == j, idx.wlo, 0.0) + np.where(idx.jlo + 1 == j, 1.0 - idx.wlo, 0.0)
        return np.where(idx.valid, w, 0.0)

    @property
    def shell_weights(self) -> dict[int, np.ndarray]:
        return {int(j): self.weight(j) for j in self.j_range}

    def cutoff(self, j: int, half: bool = False, include_mean: bool = True) -> np.ndarray:
        """Phi_j = sum_{j' <= j} phi_j' on the lattice (the S_j multiplier)."""
        idx = self._half if half else self._full
        w = np.where(idx.jlo + 1 <= j, 1.0, np.where(idx.jlo == j, idx.wlo, 0.0))
        return np.where(idx.valid, w, 1.0 if include_mean else 0.0)

    def check_index(self, j: int):
        if not self.j_min <= j <= self.j_max:
            raise IndexError(f"shell {j} outside filter range [{self.j_min}, {self.j_max}]")

    def shell_energy(self, coeffs: np.ndarray, half: bool = False, multiplier=None) -> np.ndarray:
        """Squared L2 norms ||Delta_j u||^2 for every shell in ``j_range``.

        ``coeffs`` has the lattice shape, optionally with leading component
        axes; components are summed.  ``multiplier`` is an optional real
        per-mode factor applied to |u_hat|^2 (e.g. |xi|^{2 sigma}).
        """
        idx = self._half if half else self._full
        c = np.asarray(coeffs)
        p = (c.real**2 + c.imag**2).reshape((-1,) + idx.jlo.shape).sum(axis=0)
        if multiplier is not None:
            p = p * multiplier
        return self.shell_energy_from_power(p, half=half)

    def shell_energy_from_power(self, power: np.ndarray, half: bool = False) -> np.ndarray:
        """Shell sums of a precomputed per-mode power spectrum |u_hat|^2."""
        idx = self._half if half else self._full
        p = power * self.grid.half_multiplicity if half else power
        p = np.where(idx.valid, p, 0.0)
        nj = self.j_max - self.j_min + 1
        i = (idx.jlo - self.j_min).ravel()
        w = idx.wlo.ravel()
        pr = p.ravel()
        lo_ok = (i >= 0) & (i < nj)
        hi_ok = (i + 1 >= 0) & (i + 1 < nj)
        e = np.bincount(i[lo_ok], weights=(w**2 * pr)[lo_ok], minlength=nj)[:nj]
        e += np.bincount(i[hi_ok] + 1, weights=((1 - w) ** 2 * pr)[hi_ok], minlength=nj)[:nj]
        return e * self.grid.cell_volume

    def shell_norms(self, coeffs: np.ndarray, half: bool = False, multiplier=None) -> np.ndarray:
        return np.sqrt(self.shell_energy(coeffs, half=half, multiplier=multiplier))


def build_filters(grid: Grid) -> DyadicFilterBank:
    return DyadicFilterBank(grid)


def _bank_for(u: SpectralField, bank: DyadicFilterBank | None) -> DyadicFilterBank:
    if bank is None:
        return DyadicFilterBank(u.grid)
    if not bank.grid.compatible(u.grid):
        raise ValueError("filter bank and field live on different grids")
    return bank


def lp_block(u: SpectralField, j: int, bank: DyadicFilterBank | None = None) -> SpectralField:
    bank = _bank_for(u, bank)
    bank.check_index(j)
    return u.with_coefficients(u.coefficients * bank.weight(j))


@dataclass
class BesovReport:
    s: float
    sigma: float
    value: float
    per_shell: list[tuple[int, float]]
    p: int = 2
    band: tuple[float, float] | None = None

    def csv_rows(self) -> list[tuple[int, float]]:
        return list(self.per_shell)

    def to_csv(self) -> str:
        lines = ["j,shell_value"] + [f"{j},{v:.17g}" for j, v in self.per_shell]
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "s": self.s,
            "p": self.p,
            "sigma": "inf" if self.sigma == np.inf else 1,
            "value": self.value,
            "band": list(self.band) if self.band else None,
            "shells": [int(self.per_shell[0][0]), int(self.per_shell[-1][0])] if self.per_shell else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2)


def besov_norm(u: SpectralField, s: float, sigma=1, bank: DyadicFilterBank | None = None) -> BesovReport:
    """Homogeneous B^s_{2,sigma} norm; the mean is excluded from every shell."""
    bank = _bank_for(u, bank)
    sigma = _norm_sigma(sigma)
    shells = bank.shell_norms(u.coefficients) * 2.0 ** (s * bank.j_range)
    value = float(shells.max() if sigma == np.inf else shells.sum())
    return BesovReport(
        s=s,
        sigma=sigma,
        value=value,
        per_shell=[(int(j), float(v)) for j, v in zip(bank.j_range, shells)],
        band=bank.band,
    )


def low_high_from_shells(js, norms, s_low: float, s_high: float, j0: int) -> tuple[float, float]:
    js = np.asarray(js)
    low = float(np.sum((2.0 ** (s_low * js) * norms)[js <= j0]))
    high = float(np.sum((2.0 ** (s_high * js) * norms)[js >= j0 - 1]))
    return low, high


def split_low_high(
    u: SpectralField, s_low: float, s_high: float, j0: int, bank: DyadicFilterBank | None = None
) -> tuple[float, float]:
    """Low part sums shells j <= j0, high part shells j >= j0 - 1."""
    bank = _bank_for(u, bank)
    bank.check_index(j0)
    return low_high_from_shells(bank.j_range, bank.shell_norms(u.coefficients), s_low, s_high, j0)


@dataclass
class ShellTrace:
    """Time series of per-shell L2 norms ||Delta_j u(t)||."""

    times: np.ndarray
    js: np.ndarray
    norms: np.ndarray  # (len(times), len(js))
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.js = np.asarray(self.js)
        self.norms = np.asarray(self.norms, dtype=float)
        if self.norms.shape != (len(self.times), len(self.js)):
            raise ValueError(f"norms shape {self.norms.shape} != ({len(self.times)}, {len(self.js)})")

    @classmethod
    def from_fields(cls, times, fields: Sequence[SpectralField], bank: DyadicFilterBank | None = None):
        if len(fields) == 0:
            raise ValueError("empty series")
        bank = _bank_for(fields[0], bank)
        return cls(times, bank.j_range, np.array([bank.shell_norms(f.coefficients) for f in fields]))

    def window(self, t_min: float, t_max: float) -> "ShellTrace":
        sel = (self.times >= t_min) & (self.times <= t_max)
        return ShellTrace(self.times[sel], self.js, self.norms[sel], dict(self.meta))

    def besov(self, s: float, sigma=1) -> np.ndarray:
        """Instantaneous B^s_{2,sigma} norm at every stored time."""
        w = self.norms * 2.0 ** (s * self.js)
        return w.max(axis=1) if _norm_sigma(sigma) == np.inf else w.sum(axis=1)


def _time_norm(values: np.ndarray, times: np.ndarray, rho) -> np.ndarray:
    """L^rho in time along axis 0 by trapezoid quadrature (max for rho = inf)."""
    if rho in (np.inf, "inf"):
        return values.max(axis=0)
    rho = float(rho)
    if len(times) == 1:
        return np.zeros(values.shape[1:])
    return trapezoid(values**rho, times, axis=0) ** (1.0 / rho)


def chemin_lerner_norm(series, rho, s: float, sigma=1, times=None, bank: DyadicFilterBank | None = None) -> float:
    """||u||_{L~^rho(B^s_{2,sigma})}: time norm per shell first, then shell sum.

    ``series`` is a ShellTrace or a sequence of SpectralFields (then ``times``
    is required).
    """
    if not isinstance(series, ShellTrace):
        if times is None:
            raise ValueError("times are required for a field sequence")
        series = ShellTrace.from_fields(times, list(series), bank)
    if len(series.times) == 0:
        raise ValueError("empty series")
    per_shell = _time_norm(series.norms, series.times, rho) * 2.0 ** (s * series.js)
    return float(per_shell.max() if _norm_sigma(sigma) == np.inf else per_shell.sum())


# --- paraproducts ---------------------------------------------------------


def _truncate(u: SpectralField) -> np.ndarray:
    return u.coefficients[0] * u.grid.dealias_mask()


def dealiased_product(u: SpectralField, v: SpectralField) -> SpectralField:
    """2/3-rule product: inputs and output truncated to |k_i| <= n/3."""
    grid = u.grid
    pu = inverse(SpectralField(grid, _truncate(u)[None]))[0]
    pv = inverse(SpectralField(grid, _truncate(v)[None]))[0]
    w = forward(pu * pv, grid)
    return w.with_coefficients(w.coefficients * grid.dealias_mask())


def _blocks_physical(u_hat: np.ndarray, bank: DyadicFilterBank):
    grid = bank.grid
    blocks = [inverse(SpectralField(grid, (u_hat * bank.weight(j))[None]))[0] for j in bank.j_range]
    mean = (u_hat.flat[0] / np.sqrt(np.prod(grid.shape))).real
    return mean, blocks


def _low_parts(mean, blocks, offset: int):
    """S_{j-offset} u for every shell index position (mean included)."""
    out = []
    acc = np.zeros_like(blocks[0]) + mean
    partial = [acc.copy()]
    for b in blocks:
        acc = acc + b
        partial.append(acc.copy())
    # partial[i] = mean + sum of first i blocks
    for i in range(len(blocks)):
        upto = i - offset + 1  # blocks with position <= i - offset
        out.append(partial[max(upto, 0)])
    return out


def bony_decompose(u: SpectralField, v: SpectralField, bank: DyadicFilterBank | None = None):
    """Split the dealiased product uv into T_u v + T_v u + R(u, v).

    Low-frequency cutoffs S_{j-3} carry the mean, and R also carries the
    mean-mean product, so the three pieces sum to ``dealiased_product(u, v)``.
    """
    if u.components != 1 or v.components != 1:
        raise ValueError("bony_decompose expects scalar fields")
    if not u.grid.compatible(v.grid):
        raise ValueError("fields live on different grids")
    bank = _bank_for(u, bank)
    grid = u.grid
    mu, ub = _blocks_physical(_truncate(u), bank)
    mv, vb = _blocks_physical(_truncate(v), bank)
    su = _low_parts(mu, ub, 3)
    sv = _low_parts(mv, vb, 3)
    nb = len(ub)
    tuv = sum(su[i] * vb[i] for i in range(nb))
    tvu = sum(sv[i] * ub[i] for i in range(nb))
    r = mu * mv + sum(
        sum(ub[k] for k in range(max(0, i - 2), min(nb, i + 3))) * vb[i] for i in range(nb)
    )
    mask = grid.dealias_mask()

    def spec(x):
        f = forward(x, grid)
        return f.with_coefficients(f.coefficients * mask)

    return spec(tuv), spec(tvu), spec(r)


def paraproduct_term(u: SpectralField, v: SpectralField, j: int, bank: DyadicFilterBank | None = None) -> SpectralField:
    """Single dealiased paraproduct piece S_{j-3}u * Delta_j v."""
    bank = _bank_for(u, bank)
    bank.check_index(j)
    grid = u.grid
    low = u.with_coefficients(_truncate(u)[None] * bank.cutoff(j - 3))
    high = v.with_coefficients(_truncate(v)[None] * bank.weight(j))
    prod = forward(inverse(low)[0] * inverse(high)[0], grid)
    return prod.with_coefficients(prod.coefficients * grid.dealias_mask())


def random_band_field(grid: Grid, rng: np.random.Generator, bank: DyadicFilterBank | None = None) -> SpectralField:
    """Real Gaussian field on the dealiased band with a random per-shell profile."""
    bank = bank or DyadicFilterBank(grid)
    white = forward(rng.standard_normal(grid.shape), grid).coefficients[0]
    slope = rng.uniform(-2.0, 2.0)
    k = grid.kmag
    with np.errstate(divide="ignore"):
        env = np.where(k > 0, (k / grid.k0) ** slope, 0.0)
    env *= np.exp(rng.normal(0.0, 0.5) * np.sin(rng.uniform(0.5, 2.0) * np.log2(np.where(k > 0, k, 1.0))))
    return SpectralField(grid, (white * env * grid.dealias_mask())[None])


def product_inequality_probe(
    s1: float,
    s2: float,
    trials: int,
    grid: Grid,
    limiting: bool = False,
    rng: np.random.Generator | None = None,
) -> float:
    """Largest observed ratio ||uv||_{B^{s1+s2-d/2}_{2,sigma}} / (||u||_{B^{s1}_{2,1}} ||v||_{B^{s2}_{2,1}}).

    sigma is 1, or inf when ``limiting`` (the s1 + s2 = 0 endpoint).
    """
    d = grid.dim
    if s1 > d / 2 or s2 > d / 2:
        raise ValueError(f"need s1, s2 <= d/2 = {d / 2}")
    if limiting and s1 + s2 < 0:
        raise ValueError("limiting product estimate needs s1 + s2 >= 0")
    if not limiting and s1 + s2 <= 0:
        raise ValueError("product estimate needs s1 + s2 > 0")
    rng = rng if rng is not None else np.random.default_rng(0)
    bank = DyadicFilterBank(grid)
    worst = 0.0
    for _ in range(trials):
        u = random_band_field(grid, rng, bank)
        v = random_band_field(grid, rng, bank)
        worst = max(worst, product_ratio(u, v, s1, s2, limiting, bank))
    return worst


def product_ratio(u: SpectralField, v: SpectralField, s1: float, s2: float, limiting: bool = False, bank=None) -> float:
    bank = _bank_for(u, bank)
    den = besov_norm(u, s1, 1, bank).value * besov_norm(v, s2, 1, bank).value
    if den == 0:
        return 0.0
    target = s1 + s2 - u.grid.dim / 2
    num = besov_norm(dealiased_product(u, v), target, np.inf if limiting else 1, bank).value
    return num / den
