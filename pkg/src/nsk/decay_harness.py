"""Decay functionals, exponent fits and numeric checks of two calculus lemmas.

The functional tracked along a trajectory U = (W a, m), W = gamma + Lambda
(or Lambda in the critical case gamma = 0), is

    D(t) = sup_s sup_{tau <= t} <tau>^{(s + d/2)/2} ||U(tau)||^low_{B^s_{2,1}}
           + sum_{j >= j0 - 1} 2^{j(d/2 - 1)} sup_{tau <= t} tau^alpha ||Delta_j Lambda^2 U(tau)||

with <t> = sqrt(1 + t^2) and alpha = d/2 + 1/2 - epsilon.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .littlewood_paley import ShellTrace

__all__ = [
    "DecayFunctionalConfig",
    "DecayFit",
    "DecaySeries",
    "d_functional",
    "fit_slope",
    "fit_decay_exponent",
    "low_frequency_series",
    "default_j0",
    "convolution_inequality_check",
    "ConvolutionCheck",
    "uniform_bound_check",
    "UniformBoundCheck",
    "japanese",
    "log_subsample",
    "write_fit_summary",
]

MIN_FIT_POINTS = 8
TRANSIENT_CUTOFF = 5.0


def japanese(t):
    """<t> = sqrt(1 + t^2)."""
    t = np.asarray(t, dtype=float)
    return np.sqrt(1.0 + t * t)


def default_j0(js, gamma: float) -> int:
    """Shell nearest |xi| = 1 when gamma > 0, mid-band otherwise."""
    js = np.asarray(js)
    if gamma > 0:
        return int(np.clip(0, js.min(), js.max()))
    return int(js[len(js) // 2])


@dataclass
class DecayFunctionalConfig:
    dim: int
    s_grid: tuple | None = None
    epsilon: float = 0.1
    j0: int | None = None
    gamma_mode: str = "positive"

    def __post_init__(self):
        d = self.dim
        if self.gamma_mode not in ("positive", "zero"):
            raise ValueError("gamma_mode must be 'positive' or 'zero'")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.s_grid is None:
            lo, hi = -d / 2, d / 2 + 1
            self.s_grid = tuple(float(x) for x in np.linspace(lo + 0.05 * (hi - lo), hi, 5))
        for s in self.s_grid:
            if not -d / 2 < s <= d / 2 + 1:
                raise ValueError(f"s = {s} outside (-d/2, d/2 + 1]")

    @property
    def alpha(self) -> float:
        return self.dim / 2 + 0.5 - self.epsilon


@dataclass
class DecaySeries:
    times: np.ndarray
    low: dict  # s -> running-sup weighted low norm
    high: np.ndarray
    values: np.ndarray
    j0: int

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            ss = sorted(self.low)
            w.writerow(["t"] + [f"low_s={s:g}" for s in ss] + ["high", "D"])
            for i, t in enumerate(self.times):
                w.writerow([repr(float(t))] + [repr(float(self.low[s][i])) for s in ss] + [repr(float(self.high[i])), repr(float(self.values[i]))])


def _weighting(cfg: DecayFunctionalConfig) -> str:
    return "gamma" if cfg.gamma_mode == "positive" else "lambda"


def d_functional(traj, cfg: DecayFunctionalConfig) -> DecaySeries:
    """D(t) at every stored time of a Trajectory (running sups over the samples)."""
    if traj.grid.dim != cfg.dim:
        raise ValueError(f"trajectory is {traj.grid.dim}-dimensional, config expects {cfg.dim}")
    if cfg.gamma_mode == "zero" and traj.params.gamma != 0:
        raise ValueError("gamma_mode 'zero' requires a trajectory with gamma = 0")
    weight = _weighting(cfg)
    low_tr = traj.pair_trace(weight, power=0)
    high_tr = traj.pair_trace(weight, power=2)
    times = low_tr.times
    js = low_tr.js
    j0 = cfg.j0 if cfg.j0 is not None else default_j0(js, traj.params.gamma)
    d = cfg.dim
    lowsel = js <= j0
    low = {}
    for s in cfg.s_grid:
        inst = (low_tr.norms[:, lowsel] * 2.0 ** (s * js[lowsel])).sum(axis=1)
        low[s] = np.maximum.accumulate(japanese(times) ** (0.5 * (s + d / 2)) * inst)
    highsel = js >= j0 - 1
    weighted = (times**cfg.alpha)[:, None] * high_tr.norms[:, highsel]
    high = (np.maximum.accumulate(weighted, axis=0) * 2.0 ** ((d / 2 - 1) * js[highsel])).sum(axis=1)
    stacked = np.vstack([low[s] for s in cfg.s_grid])
    values = stacked.max(axis=0) + high
    return DecaySeries(times, low, high, values, j0)


def low_frequency_series(traj, s: float, j0: int, weight: str = "gamma") -> tuple[np.ndarray, np.ndarray]:
    """Instantaneous low-frequency B^s_{2,1} norm of the weighted pair."""
    tr = traj.pair_trace(weight, power=0)
    sel = tr.js <= j0
    return tr.times, (tr.norms[:, sel] * 2.0 ** (s * tr.js[sel])).sum(axis=1)


@dataclass
class DecayFit:
    times: np.ndarray
    values: np.ndarray
    fitted_slope: float
    theoretical_slope: float
    tolerance: float
    window: tuple

    @property
    def passed(self) -> bool:
        return self.fitted_slope <= self.theoretical_slope + self.tolerance

    def summary(self, **extra) -> dict:
        return {
            "fitted_slope": self.fitted_slope,
            "theoretical_slope": self.theoretical_slope,
            "tolerance": self.tolerance,
            "window": list(self.window),
            "pass": bool(self.passed),
            **extra,
        }


def fit_slope(times, values) -> float:
    """Least-squares slope of log(values) against log(times)."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(t) < 2:
        raise ValueError("need at least two points")
    if np.any(v <= 0) or np.any(t <= 0):
        raise ValueError("log-log fit needs positive times and values")
    return float(np.polyfit(np.log(t), np.log(v), 1)[0])


def fit_decay_exponent(times, values, window=(TRANSIENT_CUTOFF, np.inf), theoretical: float = np.nan, tolerance: float = 0.1) -> DecayFit:
    """Fit over ``window``; times below the transient cutoff are always excluded."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    lo = max(window[0], TRANSIENT_CUTOFF)
    sel = (t >= lo) & (t <= window[1])
    if sel.sum() < MIN_FIT_POINTS:
        raise ValueError(f"only {int(sel.sum())} samples in the window; at least {MIN_FIT_POINTS} needed")
    ts, vs = t[sel], v[sel]
    if ts[-1] / ts[0] < 10 * (1 - 1e-9):
        raise ValueError("the fit window must span at least one decade of t")
    if np.any(vs <= 0):
        raise ValueError("norms must be positive on the fit window")
    return DecayFit(ts, vs, fit_slope(ts, vs), float(theoretical), float(tolerance), (float(ts[0]), float(ts[-1])))


def log_subsample(times, per_decade: int = 20):
    """Indices of samples closest to a log-spaced grid (dedupe keeps order)."""
    t = np.asarray(times, dtype=float)
    pos = t[t > 0]
    if len(pos) == 0:
        return np.array([], dtype=int)
    n = max(int(np.ceil(per_decade * math.log10(pos[-1] / pos[0]))) + 1, 2)
    targets = np.geomspace(pos[0], pos[-1], n)
    idx = np.searchsorted(t, targets)
    idx = np.clip(idx, 0, len(t) - 1)
    left = np.clip(idx - 1, 0, len(t) - 1)
    pick = np.where(np.abs(np.log(t[left].clip(1e-300)) - np.log(targets)) < np.abs(np.log(t[idx].clip(1e-300)) - np.log(targets)), left, idx)
    return np.unique(pick)


# --- appendix checks --------------------------------------------------------------


def _conv_integral(a: float, b: float, t: float) -> float:
    f = lambda tau: (1 + tau * tau) ** (-a / 2) * (1 + (t - tau) ** 2) ** (-b / 2)
    pts = [x for x in (1.0, t / 2, t - 1.0) if 0 < x < t]
    val, _ = quad(f, 0.0, t, points=pts or None, epsabs=0.0, epsrel=1e-10, limit=500)
    return val


@dataclass
class ConvolutionCheck:
    a: float
    b: float
    constants: dict  # t_max -> sup_t integral * <t>^{min(a,b)} over t <= t_max
    bounded: bool
    precondition: bool

    @property
    def relative_change(self) -> float:
        ks = sorted(self.constants)
        c1, c2 = self.constants[ks[-2]], self.constants[ks[-1]]
        return abs(c2 - c1) / c1


def convolution_inequality_check(a: float, b: float, t_max: float = 1000.0, samples: int = 200) -> ConvolutionCheck:
    """sup_t <t>^{min(a,b)} int_0^t <tau>^{-a} <t - tau>^{-b} dtau, at t_max/2 and t_max.

    ``bounded`` is True when the two constants agree to 5%.  When
    max(a, b) <= 1 the precondition fails and growth is expected.
    """
    m = min(a, b)
    consts = {}
    for tm in (t_max / 2, t_max):
        ts = np.logspace(0, np.log10(tm), samples)
        vals = [_conv_integral(a, b, t) * (1 + t * t) ** (m / 2) for t in ts]
        consts[tm] = float(max(vals))
    c1, c2 = consts[t_max / 2], consts[t_max]
    return ConvolutionCheck(a, b, consts, abs(c2 - c1) / c1 < 0.05, max(a, b) > 1)


@dataclass
class UniformBoundCheck:
    r: float
    c0: float
    sup: float
    argmax_t: float
    interior: bool
    shift_residual: float  # |S(4t) - S(t)| / S(t) with the k-range shifted
    decade_spread: float  # max/min - 1 of per-decade sups


def _dyadic_sum(r, c0, t, ks):
    x = (2.0**ks)[None, :] ** 2 * t[:, None]
    return np.sum(x ** (r / 2) * np.exp(-c0 * x), axis=1)


def uniform_bound_check(r: float, c0: float, k_range=(-60, 60), t_range=(1e-6, 1e6), per_decade: int = 50) -> UniformBoundCheck:
    """sup_t sum_k (2^k t^{1/2})^r exp(-c0 4^k t) on a log grid of t."""
    if not (r > 0 and c0 > 0):
        raise ValueError("r and c0 must be positive")
    ks = np.arange(k_range[0], k_range[1] + 1, dtype=float)
    nd = int(round(np.log10(t_range[1] / t_range[0])))
    t = np.logspace(np.log10(t_range[0]), np.log10(t_range[1]), nd * per_decade + 1)
    s = _dyadic_sum(r, c0, t, ks)
    i = int(np.argmax(s))
    # t -> 4t together with k -> k - 1 leaves every term unchanged
    s4 = _dyadic_sum(r, c0, 4 * t, ks - 1)
    shift = float(np.max(np.abs(s4 - s) / s))
    dec = [s[j * per_decade : (j + 1) * per_decade + 1].max() for j in range(nd)]
    return UniformBoundCheck(r, c0, float(s[i]), float(t[i]), 0 < i < len(t) - 1, shift, float(max(dec) / min(dec) - 1))


def write_fit_summary(path, fits: list[dict]):
    with open(path, "w") as fh:
        json.dump(fits, fh, indent=2, sort_keys=True)
