"""The invariant and oracle suite run by ``nsk check`` and the acceptance tests.

Every check compares the package against an independent route: LAPACK or
mpmath eigensolves, scipy's matrix exponential, bracketing root finders,
algebraically equivalent formulations, or exact reconstruction identities.
"""
from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq

from . import linear_analysis as la
from .littlewood_paley import DyadicFilterBank, bony_decompose, dealiased_product, random_band_field
from .nsk_solver import FluidState, NSKSolver, korteweg_div, nonlinear_rhs, scaling_invariance_probe
from .pressure import PolytropicLaw, VanDerWaalsLaw
from .spectral_core import make_grid


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.value:.3e} (threshold {self.threshold:.1e}) {self.detail}".rstrip()


def random_params(rng: np.random.Generator) -> la.FluidParams:
    """Log-uniform draws satisfying the parameter invariants; about 20% have gamma = 0."""
    mu = 10 ** rng.uniform(-2, 1)
    return la.FluidParams(
        rho_star=10 ** rng.uniform(-1, 1),
        mu=mu,
        lam=rng.uniform(-1.9 * mu, 5 * mu),
        kappa=10 ** rng.uniform(-2, 1),
        gamma=0.0 if rng.random() < 0.2 else 10 ** rng.uniform(-3, 2),
    )


def _sorted_pair(lp, lm):
    z = np.array([complex(lp), complex(lm)])
    return z[np.lexsort((z.imag, z.real))]


# --- linear analysis ----------------------------------------------------------------


def eigen_oracle(draws: int = 10_000, mp_draws: int = 2_000, seed: int = 1) -> list[CheckResult]:
    """Closed-form eigenvalues against LAPACK (normwise) and 40-digit mpmath (per eigenvalue)."""
    rng = np.random.default_rng(seed)
    worst_nw = worst_mp = 0.0
    mpmath.mp.dps = 40
    for i in range(draws):
        p = random_params(rng)
        k = 10 ** rng.uniform(-3, 3)
        cf = _sorted_pair(*la.eigenvalues_closed_form(p, k))
        A = la.symbol_matrix(p, k)
        num = _sorted_pair(*np.linalg.eigvals(A))
        worst_nw = max(worst_nw, float(np.max(np.abs(cf - num)) / np.max(np.abs(cf))))
        if i < mp_draws:
            ev = mpmath.eig(mpmath.matrix(A.tolist()), left=False, right=False)
            ref = _sorted_pair(*[complex(e) for e in ev])
            worst_mp = max(worst_mp, float(np.max(np.abs(cf - ref) / np.abs(ref))))
    return [
        CheckResult("eigenvalues vs LAPACK (normwise relative)", worst_nw < 1e-10, worst_nw, 1e-10, f"{draws} draws"),
        CheckResult("eigenvalues vs mpmath (per-eigenvalue relative)", worst_mp < 1e-10, worst_mp, 1e-10, f"{mp_draws} draws"),
    ]


def regime_taxonomy(draws: int = 10_000, threshold_sets: int = 100, seed: int = 2) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(draws):
        p = random_params(rng)
        k = 10 ** rng.uniform(-3, 3)
        info = la.classify_regime(p, k)
        # oracle: discriminant of the characteristic polynomial of the symbol
        A = la.symbol_matrix(p, k)
        tr, det = A[0, 0] + A[1, 1], A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        disc = (tr * tr - 4 * det) / (tr * tr)
        expect = la.Regime.DOUBLE_ROOT if abs(disc) <= 1e-12 else (la.Regime.COMPLEX_PAIR if disc < 0 else la.Regime.REAL_PAIR)
        mismatches += info.regime != expect
    double_fail = 0
    for _ in range(threshold_sets):
        rs, ka = 10 ** rng.uniform(-1, 1), 10 ** rng.uniform(-2, 1)
        nu = 2 * np.sqrt(ka * rs**3)
        mu = rng.uniform(0.1, 0.9) * nu
        p = la.FluidParams(rs, mu, nu - 2 * mu, ka, 0.0)
        for k in 10 ** rng.uniform(-3, 3, 5):
            double_fail += la.classify_regime(p, k).regime != la.Regime.DOUBLE_ROOT
    worst_x = 0.0
    for _ in range(threshold_sets):
        rs, ka = 10 ** rng.uniform(-1, 1), 10 ** rng.uniform(-2, 1)
        nu = 2 * np.sqrt(ka * rs**3) * 10 ** rng.uniform(0.05, 1)
        mu = rng.uniform(0.1, 0.9) * nu
        p = la.FluidParams(rs, mu, nu - 2 * mu, ka, 10 ** rng.uniform(-2, 2))
        xs = la.crossover_frequency(p)
        root = brentq(lambda lk: float(la.radicand(p, 10.0**lk)), -12, 12, xtol=1e-15, rtol=1e-15)
        worst_x = max(worst_x, abs(10.0**root - xs) / xs)
    return [
        CheckResult("regime vs characteristic discriminant", mismatches == 0, mismatches, 0, f"{draws} draws"),
        CheckResult("double-root manifold nu^2 = 4 kappa rho*^3", double_fail == 0, double_fail, 0, f"{threshold_sets} sets x 5 frequencies"),
        CheckResult("crossover frequency vs root finder", worst_x < 1e-10, worst_x, 1e-10),
    ]


def lyapunov_suite(modes: int = 1000, gammas=(0.0, 0.1, 1.0, 10.0), seed: int = 3) -> list[CheckResult]:
    """Sandwich bound and exponential decay of L^2 along scipy-expm flows."""
    rng = np.random.default_rng(seed)
    base_sets = [la.FluidParams(1.0, 1.0, 0.0, 1.0), la.FluidParams(0.5, 0.3, 0.2, 2.0), la.FluidParams(2.0, 2.0, -1.0, 0.5)]
    ts = np.linspace(0.0, 10.0, 41)
    worst_sand = 0.0  # max over modes of violation ratio; <= 1 means the sandwich holds
    worst_decay = 0.0
    min_c = np.inf
    for base in base_sets:
        for g in gammas:
            p = base.replace(gamma=g)
            cert = la.certify_lyapunov(p)
            min_c = min(min_c, cert.c_tilde)
            for _ in range(modes // len(base_sets) + 1):
                k = 10 ** rng.uniform(-2, 1.5)
                z = rng.normal(size=2) + 1j * rng.normal(size=2)
                L0 = float(la.lyapunov_value(p, cert.eta, z[0], z[1], k))
                E = (g + k * k) * abs(z[0]) ** 2 + abs(z[1]) ** 2
                worst_sand = max(worst_sand, L0 / (cert.C1 * E), E / (cert.C1 * L0))
                A = la.symbol_matrix(p, k)
                for t in ts[1:]:
                    zt = expm(t * A) @ z
                    Lt = float(la.lyapunov_value(p, cert.eta, zt[0], zt[1], k))
                    bound = L0 * (np.exp(-2 * cert.c_tilde * k * k * t) + 1e-13)
                    worst_decay = max(worst_decay, Lt / bound)
    return [
        CheckResult("Lyapunov sandwich with certified C1", worst_sand <= 1.0, worst_sand, 1.0, "max of L/(C1 E), E/(C1 L)"),
        CheckResult("Lyapunov decay along exact flows", worst_decay <= 1.0 and min_c > 0, worst_decay, 1.0, f"min c~ {min_c:.4g}"),
    ]


# --- structural invariants ---------------------------------------------------------


def _smooth_state(grid, amp, rho_star=1.0, seed=0):
    x = grid.coordinates()
    L = grid.box_length
    w = 2 * np.pi / L
    a = amp * rho_star * np.exp(np.cos(w * x[0]) + np.sin(w * x[1]) - 1) * np.cos(w * (x[0] - 2 * x[1]))
    m = amp * np.stack([np.sin(w * x[1]) * np.exp(np.cos(w * x[0])), np.cos(w * (x[0] + x[1]))])
    return a, m


def mass_conservation(steps: int = 1000) -> CheckResult:
    g = make_grid(2, 32, 2 * np.pi)
    law = PolytropicLaw(1.0, 1.4, 1.0)
    p = la.FluidParams(1.0, 1.0, 0.0, 1.0, law.gamma)
    a, m = _smooth_state(g, 0.05)
    a = a - a.mean() + 0.01
    st = FluidState.from_physical(g, a, m)
    s = NSKSolver(g, p, law)
    ah, mh = st.half()
    ah, mh = ah * s.kernel.mask, mh * s.kernel.mask
    norm = np.sqrt(np.prod(g.shape))
    m0 = ah.flat[0].real / norm
    drift = 0.0
    for _ in range(steps):
        ah, mh = s.step_half(ah, mh, 0.01)
        drift = max(drift, abs(ah.flat[0].real / norm - m0))
    return CheckResult("mass drift over 1000 steps", drift < 1e-14, drift, 1e-14, f"mean {m0:.3g}")


def korteweg_agreement() -> CheckResult:
    g = make_grid(2, 64, 2 * np.pi)
    p = la.FluidParams(1.0, 1.0, 0.0, 1.0, 1.0)
    a, m = _smooth_state(g, 0.05)
    st = FluidState.from_physical(g, a, m)
    t = korteweg_div(st.a, p, "tensor").coefficients
    i = korteweg_div(st.a, p, "identity").coefficients
    rel = float(np.abs(t - i).max() / np.abs(i).max())
    return CheckResult("Korteweg tensor vs identity form", rel < 1e-9, rel, 1e-9)


def forms_agreement() -> CheckResult:
    law = VanDerWaalsLaw()
    g = make_grid(2, 64, 2 * np.pi)
    p = la.FluidParams(law.rho_star, 1.0, 0.0, 1.0, 0.0)
    a, m = _smooth_state(g, 0.02, law.rho_star)
    st = FluidState.from_physical(g, a, m)
    n1 = nonlinear_rhs(st.a, st.m, p, law, "standard").coefficients
    n2 = nonlinear_rhs(st.a, st.m, p, law, "divergence").coefficients
    rel = float(np.abs(n1 - n2).max() / np.abs(n1).max())
    return CheckResult("standard vs divergence forcing at gamma = 0", rel < 1e-8, rel, 1e-8)


def bony_and_partition(seed: int = 4) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst_b = 0.0
    for dim, n in [(1, 256), (2, 64)]:
        g = make_grid(dim, n, 2 * np.pi)
        bank = DyadicFilterBank(g)
        for _ in range(5):
            u = random_band_field(g, rng, bank)
            v = random_band_field(g, rng, bank)
            tuv, tvu, r = bony_decompose(u, v, bank)
            prod = dealiased_product(u, v).coefficients
            rec = tuv.coefficients + tvu.coefficients + r.coefficients
            worst_b = max(worst_b, float(np.abs(rec - prod).max() / np.abs(prod).max()))
    worst_p = 0.0
    for dim, n, L in [(1, 64, 2 * np.pi), (2, 64, 7.3), (3, 16, 100.0)]:
        g = make_grid(dim, n, L)
        bank = DyadicFilterBank(g)
        total = sum(bank.weight(j) for j in bank.j_range)
        nz = g.kmag > 0
        worst_p = max(worst_p, float(np.abs(total[nz] - 1).max()))
    return [
        CheckResult("Bony reconstruction T_u v + T_v u + R = uv", worst_b < 1e-10, worst_b, 1e-10),
        CheckResult("partition of unity sum_j phi_j = 1", worst_p < 1e-12, worst_p, 1e-12),
    ]


def scaling_check(nu_scale: float = 2.0) -> CheckResult:
    """Powers of two rescale every operation exactly; other factors leave roundoff."""
    g = make_grid(2, 32, 2 * np.pi)
    law = PolytropicLaw(1.0, 1.4, 1.0)
    p = la.FluidParams(1.0, 0.5, 0.0, 0.5, law.gamma)
    a, m = _smooth_state(g, 0.02)
    st = FluidState.from_physical(g, a, m)
    # nu^2 t / dt must be an integer so both runs take whole steps
    res = scaling_invariance_probe(st, nu_scale, p, law, t=0.16, dt=0.02)
    return CheckResult(f"scaling invariance residual (nu = {nu_scale:g})", res < 1e-4, res, 1e-4)


def invariant_suite() -> list[CheckResult]:
    return [mass_conservation(), korteweg_agreement(), forms_agreement(), *bony_and_partition(), scaling_check(2.0), scaling_check(1.5)]


def appendix_suite() -> list[CheckResult]:
    from .experiments import appendix_results

    res = appendix_results()
    out = []
    for key, v in res["convolution"].items():
        if v["precondition"]:
            out.append(CheckResult(f"convolution constant stable (a,b = {key})", v["bounded"], v["relative_change"], 0.05))
        else:
            out.append(CheckResult(f"convolution growth without precondition (a,b = {key})", not v["bounded"], v["relative_change"], 0.05, "growth expected"))
    for key, v in res["uniform_bound"].items():
        ok = v["interior"] and v["decade_spread"] < 0.01 and v["shift_residual"] < 1e-12
        out.append(CheckResult(f"dyadic sum bounded and scale invariant (r,c0 = {key})", ok, v["decade_spread"], 0.01, f"sup {v['sup']:.4g}"))
    return out


def full_suite() -> list[CheckResult]:
    return [*eigen_oracle(), *regime_taxonomy(), *lyapunov_suite(), *invariant_suite(), *appendix_suite()]
