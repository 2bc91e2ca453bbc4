"""Linearized capillary system around (rho_*, 0) in frequency space.

After the Helmholtz split m = w + (compressible part), each nonzero mode
carries a 2x2 block for (a_hat, v_hat) with v = Lambda^{-1} div m, plus a
scalar heat factor for the divergence-free part w.  Functions of the block
(exponential and the phi_k family used by exponential integrators) are
evaluated in closed form through f(M) = alpha I + beta (M - c I), with
c = tr(M)/2 and alpha, beta built from f at the two eigenvalues c +- s.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .littlewood_paley import DyadicFilterBank, ShellTrace, chemin_lerner_norm
from .spectral_core import Grid, SpectralField, _unit_directions

__all__ = [
    "ParameterError",
    "DegenerateModeWarning",
    "FluidParams",
    "Regime",
    "RegimeInfo",
    "LyapunovCertificate",
    "symbol_matrix",
    "radicand",
    "eigenvalues_closed_form",
    "eigenvalues_numeric",
    "classify_regime",
    "crossover_frequency",
    "lyapunov_eta",
    "lyapunov_value",
    "lyapunov_dissipation",
    "certify_lyapunov",
    "local_decay_rate",
    "mode_exponential",
    "phi",
    "LinearOperator",
    "propagate_linear",
    "duhamel",
    "semigroup_decay_probe",
    "maximal_regularity_probe",
    "heat_lemma_probe",
    "dispersion_table",
]


class ParameterError(ValueError):
    pass


class DegenerateModeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FluidParams:
    """Constant-state parameters: rho_*, viscosities mu/lambda, capillarity kappa, gamma = P'(rho_*)."""

    rho_star: float = 1.0
    mu: float = 1.0
    lam: float = 0.0
    kappa: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        checks = [
            (self.rho_star > 0, f"rho_* > 0 required (got {self.rho_star})"),
            (self.mu > 0, f"mu > 0 required (got {self.mu})"),
            (self.lam + 2 * self.mu > 0, f"lambda + 2 mu > 0 required (got {self.lam + 2 * self.mu})"),
            (self.kappa > 0, f"kappa > 0 required (got {self.kappa})"),
            (self.gamma >= 0, f"gamma = P'(rho_*) >= 0 required (got {self.gamma})"),
        ]
        for ok, msg in checks:
            if not ok or not np.isfinite([self.rho_star, self.mu, self.lam, self.kappa, self.gamma]).all():
                raise ParameterError(msg if not ok else "parameters must be finite")

    @property
    def nu(self) -> float:
        return 2 * self.mu + self.lam

    @property
    def nu_bar(self) -> float:
        return self.nu / self.rho_star

    @property
    def mu_bar(self) -> float:
        return self.mu / self.rho_star

    def replace(self, **kw) -> "FluidParams":
        d = dict(rho_star=self.rho_star, mu=self.mu, lam=self.lam, kappa=self.kappa, gamma=self.gamma)
        d.update(kw)
        return FluidParams(**d)

    def as_dict(self) -> dict:
        return dict(rho_star=self.rho_star, mu=self.mu, lam=self.lam, kappa=self.kappa, gamma=self.gamma)


class Regime(str, enum.Enum):
    COMPLEX_PAIR = "ComplexPair"
    DOUBLE_ROOT = "DoubleRoot"
    REAL_PAIR = "RealPair"


DOUBLE_ROOT_TOL = 1e-12


def symbol_matrix(p: FluidParams, xi_mag):
    """A(xi) = [[0, -|xi|], [(gamma + kappa rho_* |xi|^2)|xi|, -nu_bar |xi|^2]]."""
    k = np.asarray(xi_mag, dtype=float)
    if np.any(k < 0):
        raise ValueError("xi_mag must be nonnegative")
    out = np.zeros(k.shape + (2, 2))
    out[..., 0, 1] = -k
    out[..., 1, 0] = (p.gamma + p.kappa * p.rho_star * k**2) * k
    out[..., 1, 1] = -p.nu_bar * k**2
    return out


def radicand(p: FluidParams, xi_mag):
    """1 - 4 kappa rho_*/nu_bar^2 - 4 gamma/(nu_bar^2 |xi|^2)."""
    k = np.asarray(xi_mag, dtype=float)
    nb2 = p.nu_bar**2
    with np.errstate(divide="ignore"):
        return 1.0 - 4 * p.kappa * p.rho_star / nb2 - 4 * p.gamma / (nb2 * k**2)


def eigenvalues_closed_form(p: FluidParams, xi_mag):
    """lambda_pm = -(nu_bar/2)|xi|^2 (1 +- sqrt(radicand)).

    For a real radicand the smaller root is taken from the product of the
    roots (det A) to avoid cancellation.  Returns complex arrays (lam_plus, lam_minus).
    """
    k = np.asarray(xi_mag, dtype=float)
    if np.any(k == 0):
        warnings.warn("xi = 0 is degenerate: both eigenvalues vanish", DegenerateModeWarning, stacklevel=2)
    safe = np.where(k > 0, k, 1.0)
    r = radicand(p, safe)
    half_tr = -0.5 * p.nu_bar * safe**2
    det = (p.gamma + p.kappa * p.rho_star * safe**2) * safe**2
    root = np.sqrt(np.abs(r))
    lp_real = half_tr * (1 + root)
    lam_plus = np.where(r >= 0, lp_real + 0j, half_tr * (1 + 1j * root))
    with np.errstate(divide="ignore", invalid="ignore"):
        lam_minus = np.where(r >= 0, det / lp_real + 0j, half_tr * (1 - 1j * root))
    lam_plus = np.where(k > 0, lam_plus, 0j)
    lam_minus = np.where(k > 0, lam_minus, 0j)
    return lam_plus, lam_minus


def eigenvalues_numeric(p: FluidParams, xi_mag):
    """Eigenvalues from a dense LAPACK eigensolve of the symbol, sorted by real part."""
    ev = np.linalg.eigvals(symbol_matrix(p, xi_mag))
    order = np.argsort(ev.real, axis=-1)
    return np.take_along_axis(ev, order, axis=-1)


def crossover_frequency(p: FluidParams) -> float | None:
    """|xi*| where the radicand changes sign; exists only for nu^2 > 4 kappa rho_*^3 and gamma > 0."""
    excess = p.nu**2 - 4 * p.kappa * p.rho_star**3
    if excess <= 0 or p.gamma <= 0:
        return None
    return math.sqrt(4 * p.gamma * p.rho_star**2 / excess)


@dataclass(frozen=True)
class RegimeInfo:
    regime: Regime
    radicand: float
    crossover: float | None


def classify_regime(p: FluidParams, xi_mag: float) -> RegimeInfo:
    if xi_mag <= 0:
        raise ValueError("classification needs |xi| > 0")
    r = float(radicand(p, xi_mag))
    if abs(r) <= DOUBLE_ROOT_TOL:
        reg = Regime.DOUBLE_ROOT
    elif r < 0:
        reg = Regime.COMPLEX_PAIR
    else:
        reg = Regime.REAL_PAIR
    return RegimeInfo(reg, r, crossover_frequency(p))


# --- Lyapunov functional ---------------------------------------------------


def lyapunov_eta(p: FluidParams) -> float:
    """Half the smallest admissible coupling weight.

    The first two caps are the ones used in the energy argument; the last
    two are the positivity conditions of the functional and of its
    dissipation written out for general rho_* (inactive when rho_* = 1).
    """
    b1 = 1.0 / (p.rho_star / p.nu + 2 * p.nu / (p.kappa * p.rho_star**3))
    b2 = 2 * math.sqrt(2) / (p.kappa * p.rho_star)
    b3 = math.sqrt(p.kappa * p.rho_star)
    b4 = p.nu_bar / (1 + p.nu_bar**2 / (4 * p.kappa * p.rho_star))
    return 0.5 * min(b1, b2, b3, b4)


def lyapunov_value(p: FluidParams, eta: float, a_hat, v_hat, xi_mag):
    """L^2 = (gamma + kappa rho_* |xi|^2)|a|^2 + |v|^2 - 2 eta |xi| Re(a conj(v))."""
    a_hat, v_hat, k = np.asarray(a_hat), np.asarray(v_hat), np.asarray(xi_mag, dtype=float)
    return (
        (p.gamma + p.kappa * p.rho_star * k**2) * np.abs(a_hat) ** 2
        + np.abs(v_hat) ** 2
        - 2 * eta * k * np.real(a_hat * np.conj(v_hat))
    )


def lyapunov_dissipation(p: FluidParams, eta: float, a_hat, v_hat, xi_mag):
    """D with (1/2) d/dt L^2 = -D along the homogeneous flow."""
    a_hat, v_hat, k = np.asarray(a_hat), np.asarray(v_hat), np.asarray(xi_mag, dtype=float)
    return (
        (p.nu_bar - eta) * k**2 * np.abs(v_hat) ** 2
        + eta * (p.gamma + p.kappa * p.rho_star * k**2) * k**2 * np.abs(a_hat) ** 2
        - eta * p.nu_bar * k**3 * np.real(a_hat * np.conj(v_hat))
    )


def _gen_eig_2x2(a11, a12, a22, b11, b12, b22):
    """Eigenvalues (min, max) of the symmetric pencil A - lambda B, B positive definite."""
    qa = b11 * b22 - b12**2
    qb = -(a11 * b22 + a22 * b11 - 2 * a12 * b12)
    qc = a11 * a22 - a12**2
    disc = np.sqrt(np.maximum(qb**2 - 4 * qa * qc, 0.0))
    big = np.where(qb <= 0, (-qb + disc) / (2 * qa), (-qb - disc) / (2 * qa))
    with np.errstate(divide="ignore", invalid="ignore"):
        other = np.where(big != 0, qc / (qa * big), (-qb - disc) / (2 * qa))
    return np.minimum(big, other), np.maximum(big, other)


def _pencils(p: FluidParams, eta: float, g):
    """Forms in the scaled variables (|xi| a_hat, v_hat); g = gamma / |xi|^2."""
    kr = p.kappa * p.rho_star
    lyap = (g + kr, -eta, np.ones_like(g))
    diss = (eta * (g + kr), -eta * p.nu_bar / 2, (p.nu_bar - eta) * np.ones_like(g))
    energy = (g + 1.0, np.zeros_like(g), np.ones_like(g))
    return lyap, diss, energy


def local_decay_rate(p: FluidParams, eta: float, xi_mag):
    """Largest c with D >= c |xi|^2 L^2 at this frequency."""
    k = np.asarray(xi_mag, dtype=float)
    g = p.gamma / np.where(k > 0, k, np.nan) ** 2
    lyap, diss, _ = _pencils(p, eta, g)
    return _gen_eig_2x2(*diss, *lyap)[0]


@dataclass(frozen=True)
class LyapunovCertificate:
    eta: float
    c_tilde: float
    C1: float


def certify_lyapunov(p: FluidParams, eta: float | None = None, safety: float = 0.99) -> LyapunovCertificate:
    """Numeric constants for the Lyapunov argument.

    Both ratios depend on |xi| only through g = gamma/|xi|^2, so a dense
    log grid in g plus the two limits, refined by a bounded 1-D search,
    covers every frequency.
    """
    eta = lyapunov_eta(p) if eta is None else eta
    g = np.concatenate([[0.0], np.logspace(-10, 10, 4001)])
    lyap, diss, energy = _pencils(p, eta, g)
    rate = _gen_eig_2x2(*diss, *lyap)[0]
    lo_le, hi_le = _gen_eig_2x2(*lyap, *energy)
    if np.any(lo_le <= 0) or np.any(rate <= 0):
        raise ParameterError(f"eta = {eta} does not give a positive definite Lyapunov functional")

    def rate_at(lg):
        gg = np.array([10.0**lg])
        return float(_gen_eig_2x2(*_pencils(p, eta, gg)[1], *_pencils(p, eta, gg)[0])[0][0])

    i = int(np.argmin(rate[1:])) + 1
    lg = np.log10(g[i])
    res = minimize_scalar(rate_at, bounds=(lg - 0.01, lg + 0.01), method="bounded", options={"xatol": 1e-10})
    c_min = min(float(rate.min()), float(res.fun), eta, p.nu_bar - eta)
    c1 = max(float(hi_le.max()), float((1.0 / lo_le).max()))
    return LyapunovCertificate(eta=eta, c_tilde=safety * c_min, C1=c1 / safety)


# --- functions of the 2x2 block ---------------------------------------------

_FACT = [math.factorial(i) for i in range(40)]


def phi(z, k: int):
    """phi_k(z) = sum_n z^n/(n+k)!, with phi_0 = exp; safe at z = 0."""
    z = np.asarray(z, dtype=complex)
    if k == 0:
        return np.exp(z)
    small = np.abs(z) < 1.0
    out = np.empty_like(z)
    zs = z[small]
    acc = np.zeros_like(zs)
    for n in range(30, -1, -1):
        acc = acc * zs + 1.0 / _FACT[n + k]
    out[small] = acc
    zb = z[~small]
    val = np.exp(zb)
    for j in range(1, k + 1):
        val = (val - 1.0 / _FACT[j - 1]) / zb
    out[~small] = val
    return out


_CONTOUR_M = 32
_CONTOUR = np.exp(2j * np.pi * (np.arange(_CONTOUR_M) + 0.5) / _CONTOUR_M)


def _alpha_beta(k_fn: int, c, s):
    """alpha = (f(c+s)+f(c-s))/2 and beta = divided difference f[c+s, c-s] for f = phi_k."""
    fp = phi(c + s, k_fn)
    fm = phi(c - s, k_fn)
    alpha = 0.5 * (fp + fm)
    near = np.abs(s) < 0.1
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = np.where(near, 0.0, (fp - fm) / (2 * np.where(near, 1.0, s)))
    if np.any(near):
        cn, sn = c[near], s[near]
        z = _CONTOUR[None, :]
        vals = phi(cn[:, None] + z, k_fn)
        beta_near = np.mean(vals * z / (z**2 - sn[:, None] ** 2), axis=1)
        beta = beta.astype(complex)
        beta[near] = beta_near
    return alpha, beta


@dataclass
class BlockFunction:
    """f(h A) per mode for the (a, v) block, plus f(-h mu_bar |xi|^2) for w."""

    f11: np.ndarray
    f12: np.ndarray
    f21: np.ndarray
    f22: np.ndarray
    heat: np.ndarray


def _block_function(p: FluidParams, kmag: np.ndarray, h: float, k_fn: int) -> BlockFunction:
    k = kmag
    m12 = -h * k
    m21 = h * (p.gamma + p.kappa * p.rho_star * k**2) * k
    m22 = -h * p.nu_bar * k**2
    c = (0.5 * m22).astype(complex)
    det = -m12 * m21
    s = np.sqrt(c**2 - det)
    alpha, beta = _alpha_beta(k_fn, c.ravel(), s.ravel())
    alpha = alpha.reshape(k.shape).real
    beta = beta.reshape(k.shape).real
    heat = phi((-h * p.mu_bar * k**2).astype(complex), k_fn).real
    return BlockFunction(
        f11=alpha - beta * c.real,
        f12=beta * m12,
        f21=beta * m21,
        f22=alpha + beta * (m22 - c.real),
        heat=heat,
    )


def mode_exponential(p: FluidParams, xi_mag, t: float):
    """exp(t A(xi)) as a (..., 2, 2) real array."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    k = np.atleast_1d(np.asarray(xi_mag, dtype=float))
    bf = _block_function(p, k, t, 0)
    out = np.stack([np.stack([bf.f11, bf.f12], -1), np.stack([bf.f21, bf.f22], -1)], -2)
    return out.reshape(np.shape(xi_mag) + (2, 2))


class LinearOperator:
    """Linear part of the momentum system on an arbitrary lattice (full or half)."""

    def __init__(self, p: FluidParams, kmag: np.ndarray, odd_wavevectors):
        self.p = p
        self.kmag = np.asarray(kmag, dtype=float)
        self.e, _ = _unit_directions([np.broadcast_to(k, self.kmag.shape) for k in odd_wavevectors])
        self._cache: dict = {}

    @classmethod
    def for_grid(cls, p: FluidParams, grid: Grid, half: bool = False) -> "LinearOperator":
        if half:
            return cls(p, grid.half_kmag, grid.half_odd_wavevectors)
        return cls(p, grid.kmag, grid.odd_wavevectors)

    def functions(self, h: float, k_fn: int) -> BlockFunction:
        key = (float(h), k_fn)
        if key not in self._cache:
            self._cache[key] = _block_function(self.p, self.kmag, h, k_fn)
        return self._cache[key]

    def split(self, m_hat):
        v = 1j * sum(ei * mi for ei, mi in zip(self.e, m_hat))
        w = np.stack([mi + 1j * ei * v for ei, mi in zip(self.e, m_hat)])
        return v, w

    def join(self, v, w):
        return np.stack([wi - 1j * ei * v for ei, wi in zip(self.e, w)])

    def apply(self, f: BlockFunction, a_hat, m_hat):
        v, w = self.split(m_hat)
        a2 = f.f11 * a_hat + f.f12 * v
        v2 = f.f21 * a_hat + f.f22 * v
        return a2, self.join(v2, f.heat * w)

    def propagate(self, a_hat, m_hat, t: float):
        if t < 0:
            raise ValueError("t must be nonnegative")
        return self.apply(self.functions(t, 0), a_hat, m_hat)


def propagate_linear(a: SpectralField, m: SpectralField, p: FluidParams, t: float, op: LinearOperator | None = None):
    """Exact linear flow exp(tK) applied mode by mode."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if not a.grid.compatible(m.grid):
        raise ValueError("a and m live on different grids")
    if m.components != a.grid.dim:
        raise ValueError("momentum must have d components")
    op = op or LinearOperator.for_grid(p, a.grid)
    a2, m2 = op.propagate(a.coefficients[0], m.coefficients, t)
    return a.with_coefficients(a2[None]), m.with_coefficients(m2)


def duhamel(op: LinearOperator, a0, m0, times, f_a, f_m):
    """Solve the forced linear system on sample times.

    Forcing is interpolated linearly between samples and each interval is
    integrated exactly:  u+ = e^{hK} u + h phi1(hK) F_i + h phi2(hK) (F_{i+1} - F_i).
    ``f_a`` has shape (T, *lattice) and ``f_m`` (T, d, *lattice).  Returns the
    list of (a_hat, m_hat) at every sample time.
    """
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("sample times must increase")
    if len(f_a) != len(times) or len(f_m) != len(times):
        raise ValueError("forcing samples do not match the time samples")
    a, m = np.asarray(a0, dtype=complex), np.asarray(m0, dtype=complex)
    out = [(a, m)]
    for i in range(len(times) - 1):
        h = times[i + 1] - times[i]
        e0, e1, e2 = (op.functions(h, k) for k in (0, 1, 2))
        a_new, m_new = op.apply(e0, a, m)
        fa, fm = op.apply(e1, f_a[i], f_m[i])
        da, dm = op.apply(e2, f_a[i + 1] - f_a[i], f_m[i + 1] - f_m[i])
        a = a_new + h * (fa + da)
        m = m_new + h * (fm + dm)
        out.append((a, m))
    return out


# --- probes -----------------------------------------------------------------


def weighted_density(p: FluidParams, grid: Grid, a_hat, half: bool = False):
    """(gamma + Lambda) a in Fourier space."""
    k = grid.half_kmag if half else grid.kmag
    return (p.gamma + k) * a_hat


def pair_shell_norms(p: FluidParams, bank: DyadicFilterBank, a_hat, m_hat, power: float = 0.0, lam_weight: str = "gamma", half=False):
    """Shell norms of Lambda^power ((gamma + Lambda) a, m) (or (Lambda a, m) when lam_weight='lambda')."""
    grid = bank.grid
    k = grid.half_kmag if half else grid.kmag
    wa = (p.gamma + k) if lam_weight == "gamma" else k
    mult = k ** (2 * power) if power else None
    ea = bank.shell_energy(wa * a_hat, half=half, multiplier=mult)
    em = bank.shell_energy(m_hat, half=half, multiplier=mult)
    return np.sqrt(ea + em)


@dataclass
class DecayProbeResult:
    times: np.ndarray
    norms: np.ndarray
    slope: float
    predicted: float

    @property
    def passed(self) -> bool:
        return self.slope <= self.predicted + 0.1


def semigroup_decay_probe(
    p: FluidParams,
    s1: float,
    s2: float,
    a0: SpectralField,
    m0: SpectralField,
    t_min: float = 5.0,
    t_max: float = 500.0,
    samples: int = 60,
    bank: DyadicFilterBank | None = None,
) -> DecayProbeResult:
    """Log-log slope of ||e^{tK}((gamma+Lambda)a0, m0)||_{B^{s1}_{2,1}} over [t_min, t_max]."""
    from .decay_harness import fit_slope

    if s1 < s2:
        raise ValueError("need s1 >= s2")
    if t_min <= 0 or t_max / t_min < 10:
        raise ValueError("the fit window must span at least one decade of t")
    grid = a0.grid
    bank = bank or DyadicFilterBank(grid)
    op = LinearOperator.for_grid(p, grid)
    times = np.geomspace(t_min, t_max, samples)
    norms = []
    for t in times:
        a, m = op.propagate(a0.coefficients[0], m0.coefficients, t)
        norms.append(float(np.sum(pair_shell_norms(p, bank, a, m) * 2.0 ** (s1 * bank.j_range))))
    norms = np.array(norms)
    slope = fit_slope(times, norms)
    return DecayProbeResult(times, norms, slope, -(s1 - s2) / 2)


def _graded_times(times_forcing, t_end, per_unit=32, t_first=1e-4):
    fine = np.linspace(0.0, t_end, max(int(np.ceil(per_unit * t_end)), 2) + 1)
    graded = np.geomspace(t_first, t_end, 200)
    grid_t = np.union1d(np.union1d(fine, graded), np.asarray(times_forcing, dtype=float))
    return grid_t[(grid_t >= 0) & (grid_t <= t_end)]


def _interp_samples(times, values, new_times):
    """Piecewise-linear interpolation of sampled arrays along axis 0."""
    idx = np.clip(np.searchsorted(times, new_times, side="right") - 1, 0, len(times) - 2)
    t0, t1 = times[idx], times[idx + 1]
    lam = ((new_times - t0) / (t1 - t0)).reshape((-1,) + (1,) * (values.ndim - 1))
    return values[idx] * (1 - lam) + values[idx + 1] * lam


@dataclass
class MaxRegReport:
    lhs: float
    rhs: float
    lhs_sup: float
    lhs_l1: float
    rhs_data: float
    rhs_forcing: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else 0.0


def maximal_regularity_probe(
    p: FluidParams,
    a0: SpectralField,
    m0: SpectralField,
    forcing_times,
    f: list[SpectralField],
    g: list[SpectralField],
    T: float,
    s: float = 0.0,
    bank: DyadicFilterBank | None = None,
) -> MaxRegReport:
    """Both sides of the L~^inf + L~^1 maximal-regularity bound for the forced linear system."""
    grid = a0.grid
    forcing_times = np.asarray(forcing_times, dtype=float)
    if len(f) != len(forcing_times) or len(g) != len(forcing_times):
        raise ValueError("forcing samples do not match their times")
    if forcing_times[0] > 0 or forcing_times[-1] < T:
        raise ValueError("forcing must be sampled over the whole window [0, T]")
    bank = bank or DyadicFilterBank(grid)
    op = LinearOperator.for_grid(p, grid)
    fa = np.array([x.coefficients[0] for x in f])
    fm = np.array([x.coefficients for x in g])
    tt = _graded_times(forcing_times, T)
    fa_i = _interp_samples(forcing_times, fa, tt)
    fm_i = _interp_samples(forcing_times, fm, tt)
    states = duhamel(op, a0.coefficients[0], m0.coefficients, tt, fa_i, fm_i)
    sol = np.array([pair_shell_norms(p, bank, a, m) for a, m in states])
    sol2 = np.array([pair_shell_norms(p, bank, a, m, power=2) for a, m in states])
    frc = np.array([pair_shell_norms(p, bank, fa_i[i], fm_i[i]) for i in range(len(tt))])
    js = bank.j_range
    lhs_sup = chemin_lerner_norm(ShellTrace(tt, js, sol), np.inf, s)
    lhs_l1 = chemin_lerner_norm(ShellTrace(tt, js, sol2), 1, s)
    rhs_data = float(np.sum(sol[0] * 2.0 ** (s * js)))
    rhs_forcing = chemin_lerner_norm(ShellTrace(tt, js, frc), 1, s)
    return MaxRegReport(lhs_sup + lhs_l1, rhs_data + rhs_forcing, lhs_sup, lhs_l1, rhs_data, rhs_forcing)


@dataclass
class HeatLemmaReport:
    lhs: float
    rhs_data: float
    rhs_forcing: float

    def ratio(self) -> float:
        den = self.rhs_data + self.rhs_forcing
        return self.lhs / den if den > 0 else 0.0


def heat_lemma_probe(
    grid: Grid,
    nu: float,
    w0: SpectralField,
    forcing_times,
    forcing: list[SpectralField],
    T: float,
    s: float,
    q,
    r: float = 1.0,
    bank: DyadicFilterBank | None = None,
) -> HeatLemmaReport:
    """nu^{1/q} ||w||_{L~^q(B^{s+2/q})} against ||w0||_{B^s} and nu^{1/r-1} ||f||_{L~^r(B^{s-2+2/r})}."""
    bank = bank or DyadicFilterBank(grid)
    forcing_times = np.asarray(forcing_times, dtype=float)
    tt = _graded_times(forcing_times, T)
    fs = _interp_samples(forcing_times, np.array([x.coefficients for x in forcing]), tt)
    k2 = grid.kmag**2
    w = w0.coefficients.astype(complex)
    traj = [w]
    for i in range(len(tt) - 1):
        h = tt[i + 1] - tt[i]
        z = (-h * nu * k2).astype(complex)
        e0, e1, e2 = phi(z, 0).real, phi(z, 1).real, phi(z, 2).real
        w = e0 * w + h * (e1 * fs[i] + e2 * (fs[i + 1] - fs[i]))
        traj.append(w)
    js = bank.j_range
    sol = ShellTrace(tt, js, np.array([bank.shell_norms(x) for x in traj]))
    frc = ShellTrace(tt, js, np.array([bank.shell_norms(x) for x in fs]))
    qi = 0.0 if q in (np.inf, "inf") else 1.0 / float(q)
    lhs = nu**qi * chemin_lerner_norm(sol, q, s + 2 * qi)
    rhs_data = float(np.sum(bank.shell_norms(w0.coefficients) * 2.0 ** (s * js)))
    rhs_forcing = nu ** (1.0 / r - 1.0) * chemin_lerner_norm(frc, r, s - 2 + 2.0 / r)
    return HeatLemmaReport(lhs, rhs_data, rhs_forcing)


DISPERSION_COLUMNS = ("xi_mag", "re_lambda_plus", "im_lambda_plus", "re_lambda_minus", "im_lambda_minus", "regime", "c_tilde_local")


def dispersion_table(p: FluidParams, xi_values) -> list[tuple]:
    """Rows of the dispersion-relation CSV; the crossover frequency is inserted when it exists."""
    xi = np.asarray(xi_values, dtype=float)
    xi = xi[xi > 0]
    xs = crossover_frequency(p)
    if xs is not None:
        xi = np.union1d(xi, [xs])
    eta = lyapunov_eta(p)
    lp, lm = eigenvalues_closed_form(p, xi)
    rates = local_decay_rate(p, eta, xi)
    rows = []
    for k, a, b, c in zip(xi, lp, lm, rates):
        reg = Regime.DOUBLE_ROOT if xs is not None and k == xs else classify_regime(p, float(k)).regime
        rows.append((float(k), a.real, a.imag, b.real, b.imag, reg.value, float(c)))
    return rows
