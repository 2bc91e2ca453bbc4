"""Nonlinear momentum-form dynamics: forcing terms, exponential time stepping, Picard iteration.

Unknowns are a = rho - rho_* and the momentum m = rho u.  The system is
written as the exactly solvable linear part plus a momentum forcing,

    d_t a + div m = 0
    d_t m - (1/rho_*) L m - kappa rho_* grad Lap a + gamma grad a = N(a, m),

    N(b, n) = -L(Q(b) n) + kappa b grad Lap b - div(n (x) n / rho) - (P'(rho) - gamma) grad b,

with L u = mu Lap u + (mu + lambda) grad div u, rho = rho_* + b and
Q(b) = b / (rho_* rho) = 1/rho_* - 1/rho.  In the divergence form the last
two pressure/capillary pieces are written as div K(b) and -grad(b P~(b)).

Internally everything runs on the real-to-complex half lattice.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .linear_analysis import BlockFunction, FluidParams, LinearOperator, ParameterError, duhamel
from .littlewood_paley import DyadicFilterBank, ShellTrace, chemin_lerner_norm
from .pressure import PressureLaw, make_law
from .spectral_core import Grid, SpectralField, make_grid

__all__ = [
    "FluidState",
    "Trajectory",
    "NSKSolver",
    "VacuumError",
    "SolverError",
    "StepRejected",
    "PicardDivergence",
    "PicardResult",
    "korteweg_div",
    "nonlinear_rhs",
    "step",
    "picard_solve",
    "scaling_invariance_probe",
    "conserved_mass",
    "linear_trajectory",
    "save_checkpoint",
    "load_checkpoint",
    "write_diagnostics_csv",
]

FORMS = ("standard", "divergence")
VACUUM_FRACTION = 0.1


class VacuumError(RuntimeError):
    """Density dropped to the vacuum guard."""


class SolverError(RuntimeError):
    """Non-finite values appeared during a step."""


class StepRejected(ValueError):
    """The requested step violates the CFL policy."""


class PicardDivergence(RuntimeError):
    def __init__(self, ratios):
        self.ratios = list(ratios)
        super().__init__(f"Picard iteration diverging; contraction ratios {self.ratios}")


# --- lattice conversions ------------------------------------------------------


def _to_half(field: SpectralField) -> np.ndarray:
    return np.ascontiguousarray(field.coefficients[..., : field.grid.n // 2 + 1])


def _from_half(grid: Grid, coeffs: np.ndarray) -> SpectralField:
    """Hermitian completion c(-xi) = conj c(xi); exact, so half -> full -> half is lossless."""
    c = np.asarray(coeffs, dtype=complex)
    n, h = grid.n, grid.n // 2 + 1
    tail = c[..., 1 : n - h + 1][..., ::-1]
    for ax in range(c.ndim - grid.dim, c.ndim - 1):
        tail = np.roll(np.flip(tail, ax), 1, ax)
    return SpectralField(grid, np.concatenate([c, np.conj(tail)], axis=-1))


@dataclass(frozen=True)
class FluidState:
    a: SpectralField
    m: SpectralField
    time: float = 0.0

    def __post_init__(self):
        if self.a.components != 1:
            raise ValueError("a must be a scalar field")
        if self.m.components != self.a.grid.dim or not self.a.grid.compatible(self.m.grid):
            raise ValueError("m must be a d-component field on the grid of a")

    @property
    def grid(self) -> Grid:
        return self.a.grid

    def rho(self, rho_star: float) -> np.ndarray:
        return rho_star + self.grid.irfft(_to_half(self.a)[0])

    @classmethod
    def from_physical(cls, grid: Grid, a, m, time: float = 0.0) -> "FluidState":
        a_hat = grid.rfft(np.asarray(a, dtype=float))
        m_hat = grid.rfft(np.asarray(m, dtype=float))
        return cls(_from_half(grid, a_hat[None]), _from_half(grid, m_hat), time)

    @classmethod
    def from_half(cls, grid: Grid, a_hat, m_hat, time: float = 0.0) -> "FluidState":
        return cls(_from_half(grid, np.asarray(a_hat)[None]), _from_half(grid, np.asarray(m_hat)), time)

    def half(self) -> tuple[np.ndarray, np.ndarray]:
        return _to_half(self.a)[0], _to_half(self.m)


# --- diagnostics ---------------------------------------------------------------

# per-shell sums kept along a trajectory: |xi|^p |a_hat|^2 and |xi|^p |m_hat|^2
_A_POWERS = (0, 1, 2, 4, 5, 6)
_M_POWERS = (0, 4)


@dataclass
class Trajectory:
    """Time-stamped states with the shell energies needed by every decay functional."""

    grid: Grid
    params: FluidParams
    js: np.ndarray
    times: list = field(default_factory=list)
    shells: dict = field(default_factory=lambda: {f"a{q}": [] for q in _A_POWERS} | {f"m{q}": [] for q in _M_POWERS})
    scalars: dict = field(default_factory=lambda: {"mass": [], "l2_a": [], "l2_m": [], "min_rho": []})
    snapshots: list = field(default_factory=list)

    def record(self, bank: DyadicFilterBank, t: float, a_hat, m_hat, min_rho: float | None = None):
        k = self.grid.half_kmag
        pa = a_hat.real**2 + a_hat.imag**2
        pm = (m_hat.real**2 + m_hat.imag**2).sum(axis=0)
        for q in _A_POWERS:
            self.shells[f"a{q}"].append(bank.shell_energy_from_power(pa * k**q if q else pa, half=True))
        for q in _M_POWERS:
            self.shells[f"m{q}"].append(bank.shell_energy_from_power(pm * k**q if q else pm, half=True))
        mult = self.grid.half_multiplicity
        vol = self.grid.cell_volume
        self.times.append(float(t))
        self.scalars["mass"].append(float(a_hat.flat[0].real) / np.sqrt(np.prod(self.grid.shape)))
        self.scalars["l2_a"].append(float(np.sqrt(vol * np.sum(pa * mult))))
        self.scalars["l2_m"].append(float(np.sqrt(vol * np.sum(pm * mult))))
        if min_rho is None:
            min_rho = float(self.params.rho_star + self.grid.irfft(a_hat).min())
        self.scalars["min_rho"].append(min_rho)

    def array(self, name: str) -> np.ndarray:
        src = self.shells if name in self.shells else self.scalars
        return np.asarray(src[name], dtype=float)

    def pair_trace(self, weight: str = "gamma", power: int = 0, gamma: float | None = None) -> ShellTrace:
        """Shell norms of Lambda^power (W a, m) with W = gamma + Lambda, Lambda, or 1.

        ``power`` is 0 or 2.  ``weight``: "gamma", "lambda" or "plain".
        """
        if power not in (0, 2):
            raise ValueError("power must be 0 or 2")
        g = self.params.gamma if gamma is None else gamma
        off = 4 if power == 2 else 0
        a0, a1, a2 = (self.array(f"a{q + off}") for q in (0, 1, 2))
        m = self.array(f"m{off}")
        if weight == "gamma":
            ea = g * g * a0 + 2 * g * a1 + a2
        elif weight == "lambda":
            ea = a2
        elif weight == "plain":
            ea = a0
        else:
            raise ValueError(f"unknown weight {weight!r}")
        norms = np.sqrt(np.maximum(ea + m, 0.0))
        return ShellTrace(np.asarray(self.times), self.js, norms, {"weight": weight, "power": power})

    def __len__(self) -> int:
        return len(self.times)


# --- the nonlinear kernel -------------------------------------------------------


class _Kernel:
    """Pseudo-spectral evaluation of N on the half lattice."""

    def __init__(self, grid: Grid, p: FluidParams, law: PressureLaw, form: str):
        if form not in FORMS:
            raise ValueError(f"form must be one of {FORMS}, got {form!r}")
        self.grid, self.p, self.law, self.form = grid, p, law, form
        self.ks = [np.broadcast_to(k, grid.half_shape) for k in grid.half_odd_wavevectors]
        self.k2 = grid.half_kmag**2
        self.mask = grid.dealias_mask(half=True)

    def grad(self, s_hat):
        return np.stack([1j * k * s_hat for k in self.ks])

    def div_tensor(self, t_hat):
        """Row divergence of a symmetric tensor given as {(i, j): hat} with i <= j."""
        d = self.grid.dim
        out = np.zeros((d,) + self.grid.half_shape, dtype=complex)
        for (i, j), th in t_hat.items():
            out[i] += 1j * self.ks[j] * th
            if i != j:
                out[j] += 1j * self.ks[i] * th
        return out

    def lame(self, q_hat):
        """L q = mu Lap q + (mu + lambda) grad div q."""
        p = self.p
        div = sum(1j * k * qi for k, qi in zip(self.ks, q_hat))
        return -p.mu * self.k2 * q_hat + (p.mu + p.lam) * self.grad(div)

    def density(self, a_hat):
        b = self.grid.irfft(a_hat)
        rho = self.p.rho_star + b
        rmin = float(rho.min())
        if not np.isfinite(rmin):
            raise SolverError("non-finite density")
        if rmin <= VACUUM_FRACTION * self.p.rho_star:
            raise VacuumError(
                f"min density {rmin:.6g} reached the vacuum guard {VACUUM_FRACTION} rho_* = "
                f"{VACUUM_FRACTION * self.p.rho_star:.6g}"
            )
        return b, rho

    def korteweg(self, a_hat, form: str):
        """div K(rho) for rho = rho_* + a, either from the tensor or as kappa rho grad Lap rho."""
        g = self.grid
        b, rho = self.grid.irfft(a_hat), self.p.rho_star + self.grid.irfft(a_hat)
        kap = self.p.kappa
        if form == "identity":
            gl = g.irfft(self.grad(-self.k2 * a_hat))
            return g.rfft(kap * rho * gl) * self.mask
        gb = g.irfft(self.grad(a_hat))
        lap_r2 = g.irfft(-self.k2 * g.rfft(rho * rho))
        scal = 0.5 * kap * (lap_r2 - (gb**2).sum(axis=0))
        d = g.dim
        tens = {(i, j): g.rfft(-kap * gb[i] * gb[j]) for i in range(d) for j in range(i, d)}
        del b
        return (self.grad(g.rfft(scal)) + self.div_tensor(tens)) * self.mask

    def __call__(self, a_hat, m_hat):
        g, p, law = self.grid, self.p, self.law
        a_hat = a_hat * self.mask
        m_hat = m_hat * self.mask
        b, rho = self.density(a_hat)
        n = g.irfft(m_hat)
        q = b / (p.rho_star * rho)
        gb = g.irfft(self.grad(a_hat))
        d = g.dim
        out = -self.lame(g.rfft(q * n))
        inv_rho = 1.0 / rho
        if self.form == "standard":
            gl = g.irfft(self.grad(-self.k2 * a_hat))
            local = p.kappa * b * gl - (law.dP(rho) - p.gamma) * gb
            out += g.rfft(local)
            tens = {(i, j): g.rfft(-n[i] * n[j] * inv_rho) for i in range(d) for j in range(i, d)}
        else:
            lap_b2 = g.irfft(-self.k2 * g.rfft(b * b))
            scal = 0.5 * p.kappa * (lap_b2 - (gb**2).sum(axis=0)) - b * law.P_tilde(b)
            out += self.grad(g.rfft(scal))
            tens = {
                (i, j): g.rfft(-n[i] * n[j] * inv_rho - p.kappa * gb[i] * gb[j]) for i in range(d) for j in range(i, d)
            }
        out += self.div_tensor(tens)
        out *= self.mask
        if not np.all(np.isfinite(out)):
            raise SolverError("non-finite nonlinear forcing")
        return out


def _check_law(p: FluidParams, law: PressureLaw):
    if abs(p.gamma - law.gamma) > 1e-9 * max(1.0, abs(law.gamma)):
        raise ParameterError(f"params gamma={p.gamma} does not match P'(rho_*)={law.gamma} of the pressure law")
    if abs(p.rho_star - law.rho_star) > 1e-12 * p.rho_star:
        raise ParameterError("params rho_* does not match the pressure law reference density")


def korteweg_div(a: SpectralField, p: FluidParams, form: str = "tensor") -> SpectralField:
    """div K(rho_* + a) with constant kappa, from the tensor or from kappa rho grad Lap rho."""
    if form not in ("tensor", "identity"):
        raise ValueError("form must be 'tensor' or 'identity'")
    from .pressure import PolytropicLaw

    kern = _Kernel(a.grid, p, PolytropicLaw(rho_star=p.rho_star), "standard")
    return _from_half(a.grid, kern.korteweg(_to_half(a)[0], form))


def nonlinear_rhs(b: SpectralField, n: SpectralField, p: FluidParams, law: PressureLaw, form: str = "standard") -> SpectralField:
    """Momentum forcing N(b, n) (dealiased), in standard or divergence form."""
    _check_law(p, law)
    kern = _Kernel(b.grid, p, law, form)
    return _from_half(b.grid, kern(_to_half(b)[0], _to_half(n)))


# --- time stepping ---------------------------------------------------------------


def _combine(coeffs, fns) -> BlockFunction:
    names = ("f11", "f12", "f21", "f22", "heat")
    return BlockFunction(**{nm: sum(c * getattr(f, nm) for c, f in zip(coeffs, fns)) for nm in names})


class NSKSolver:
    """Exponential Runge-Kutta integrator (ETDRK2 or ETDRK4) with the exact linear flow.

    ``nonlinear=False`` switches the forcing off, leaving the exact linear flow.
    """

    def __init__(
        self,
        grid: Grid,
        params: FluidParams,
        law: PressureLaw,
        form: str = "standard",
        scheme: str = "etdrk2",
        cfl: float = 0.3,
        nonlinear: bool = True,
    ):
        if scheme not in ("etdrk2", "etdrk4"):
            raise ValueError("scheme must be 'etdrk2' or 'etdrk4'")
        _check_law(params, law)
        self.grid, self.params, self.law = grid, params, law
        self.scheme, self.cfl, self.nonlinear = scheme, cfl, nonlinear
        self.op = LinearOperator.for_grid(params, grid, half=True)
        self.kernel = _Kernel(grid, params, law, form)
        self.bank = DyadicFilterBank(grid)
        self._zero = np.zeros(grid.half_shape, dtype=complex)
        self._etd4: dict = {}

    def forcing(self, a_hat, m_hat):
        if not self.nonlinear:
            return np.zeros((self.grid.dim,) + self.grid.half_shape, dtype=complex)
        return self.kernel(a_hat, m_hat)

    def max_speed(self, a_hat, m_hat) -> float:
        rho = self.params.rho_star + self.grid.irfft(a_hat)
        u = self.grid.irfft(m_hat) / rho
        return float(np.sqrt((u**2).sum(axis=0)).max())

    def stable_dt(self, a_hat, m_hat, dt_max: float) -> float:
        """Largest dt_max / 2^k with max|u| dt / dx <= cfl."""
        speed = self.max_speed(a_hat, m_hat)
        dt = dt_max
        while speed * dt / self.grid.dx > self.cfl:
            dt /= 2
            if dt < 1e-12 * dt_max:
                raise StepRejected("CFL step collapsed")
        return dt

    def _etdrk2(self, a, m, h):
        op = self.op
        e0, e1, e2 = (op.functions(h, k) for k in (0, 1, 2))
        n0 = self.forcing(a, m)
        la, lm = op.apply(e0, a, m)
        fa, fm = op.apply(e1, self._zero, n0)
        a1, m1 = la + h * fa, lm + h * fm
        n1 = self.forcing(a1, m1)
        da, dm = op.apply(e2, self._zero, n1 - n0)
        return a1 + h * da, m1 + h * dm

    def _etdrk4_functions(self, h):
        if h not in self._etd4:
            op = self.op
            half0, half1 = op.functions(h / 2, 0), op.functions(h / 2, 1)
            p0, p1, p2, p3 = (op.functions(h, k) for k in range(4))
            self._etd4[h] = (
                half0,
                half1,
                p0,
                _combine((1, -3, 4), (p1, p2, p3)),
                _combine((1, -2), (p2, p3)),
                _combine((-1, 4), (p2, p3)),
            )
        return self._etd4[h]

    def _etdrk4(self, a, m, h):
        op, z = self.op, self._zero
        e2, q2, e, f1, f2, f3 = self._etdrk4_functions(h)
        nu = self.forcing(a, m)
        ea, em = op.apply(e2, a, m)
        qa, qm = op.apply(q2, z, nu)
        aa, am = ea + 0.5 * h * qa, em + 0.5 * h * qm
        na = self.forcing(aa, am)
        qa, qm = op.apply(q2, z, na)
        ba, bm = ea + 0.5 * h * qa, em + 0.5 * h * qm
        nb = self.forcing(ba, bm)
        ca, cm = op.apply(e2, aa, am)
        qa, qm = op.apply(q2, z, 2 * nb - nu)
        ca, cm = ca + 0.5 * h * qa, cm + 0.5 * h * qm
        nc = self.forcing(ca, cm)
        ua, um = op.apply(e, a, m)
        parts = [op.apply(f1, z, nu), op.apply(f2, z, 2 * (na + nb)), op.apply(f3, z, nc)]
        return ua + h * sum(x[0] for x in parts), um + h * sum(x[1] for x in parts)

    def step_half(self, a_hat, m_hat, h: float):
        if not h > 0:
            raise StepRejected(f"dt must be positive, got {h}")
        if self.nonlinear and self.max_speed(a_hat, m_hat) * h / self.grid.dx > self.cfl * (1 + 1e-12):
            raise StepRejected(f"dt={h} violates the CFL bound {self.cfl}")
        fn = self._etdrk2 if self.scheme == "etdrk2" else self._etdrk4
        a2, m2 = fn(a_hat, m_hat, float(h))
        if not (np.all(np.isfinite(a2)) and np.all(np.isfinite(m2))):
            raise SolverError("non-finite state after step")
        return a2, m2

    def step(self, state: FluidState, dt: float) -> FluidState:
        a, m = state.half()
        a2, m2 = self.step_half(a * self.kernel.mask, m * self.kernel.mask, dt)
        return FluidState.from_half(self.grid, a2, m2, state.time + dt)

    def run(
        self,
        state: FluidState,
        t_end: float,
        dt: float,
        record_every: int = 1,
        snapshot_times=(),
        trajectory: bool = True,
    ):
        """Advance to ``t_end`` with step dt (halved when the CFL bound demands).

        Returns (final state, Trajectory or None).  Snapshots are stored at the
        first step reaching each requested time.
        """
        a, m = state.half()
        a, m = a * self.kernel.mask, m * self.kernel.mask
        t = state.time
        traj = Trajectory(self.grid, self.params, self.bank.j_range) if trajectory else None
        snaps = sorted(snapshot_times)
        if traj is not None:
            traj.record(self.bank, t, a, m)
        count = 0
        while t < t_end - 1e-12 * max(1.0, abs(t_end)):
            h = min(self.stable_dt(a, m, dt) if self.nonlinear else dt, t_end - t)
            a, m = self.step_half(a, m, h)
            t += h
            count += 1
            if traj is not None and (count % record_every == 0 or t >= t_end - 1e-12):
                traj.record(self.bank, t, a, m)
            while snaps and t >= snaps[0] - 1e-12:
                snaps.pop(0)
                if traj is not None:
                    traj.snapshots.append(FluidState.from_half(self.grid, a, m, t))
        return FluidState.from_half(self.grid, a, m, t), traj


def step(state: FluidState, dt: float, p: FluidParams, law: PressureLaw, scheme: str = "etdrk2", form: str = "standard") -> FluidState:
    return NSKSolver(state.grid, p, law, form=form, scheme=scheme).step(state, dt)


def conserved_mass(state: FluidState) -> float:
    """Mean of a over the box."""
    return float(state.a.mean[0].real)


def linear_trajectory(grid: Grid, p: FluidParams, a0: SpectralField, m0: SpectralField, times) -> Trajectory:
    """Exact linear flow sampled at ``times`` (starting from t = 0)."""
    op = LinearOperator.for_grid(p, grid, half=True)
    bank = DyadicFilterBank(grid)
    traj = Trajectory(grid, p, bank.j_range)
    a, m = _to_half(a0)[0], _to_half(m0)
    for t in times:
        at, mt = op.propagate(a, m, float(t))
        traj.record(bank, t, at, mt, min_rho=np.nan)
    return traj


# --- Picard iteration ----------------------------------------------------------------


@dataclass
class PicardResult:
    times: np.ndarray
    deltas: list
    ratios: list
    final: tuple  # (a_hat, m_hat) samples of the last iterate, half lattice, shape (T, ...)
    iterates: list  # kept only on request

    def state_at_end(self, grid: Grid) -> FluidState:
        a, m = self.final
        return FluidState.from_half(grid, a[-1], m[-1], float(self.times[-1]))


def _cl_norm(p: FluidParams, bank: DyadicFilterBank, times, a, m) -> float:
    """L~^inf_T(B^{d/2-1}) of ((gamma+Lambda)a, m) plus L~^1_T(B^{d/2+1}) of the same pair."""
    grid = bank.grid
    k = grid.half_kmag
    wa = p.gamma + k
    low, high = [], []
    for at, mt in zip(a, m):
        pw = (wa**2) * (at.real**2 + at.imag**2) + (mt.real**2 + mt.imag**2).sum(axis=0)
        low.append(bank.shell_energy_from_power(pw, half=True))
        high.append(bank.shell_energy_from_power(pw * k**4, half=True))
    s = grid.dim / 2 - 1
    t_low = ShellTrace(times, bank.j_range, np.sqrt(low))
    t_high = ShellTrace(times, bank.j_range, np.sqrt(high))
    return chemin_lerner_norm(t_low, np.inf, s) + chemin_lerner_norm(t_high, 1, s)


def picard_solve(
    data: FluidState,
    T: float,
    iterations: int,
    p: FluidParams,
    law: PressureLaw,
    steps: int = 64,
    form: str = "standard",
    keep_iterates: bool = False,
) -> PicardResult:
    """Iterate (b, n) -> solution of the linear system forced by N(b, n) on [0, T].

    Iterate 0 is the linear flow of the data.  Each iterate is sampled on a
    uniform grid of ``steps`` intervals and the Duhamel integral uses
    piecewise-linear forcing, integrated exactly per interval.
    """
    _check_law(p, law)
    grid = data.grid
    kern = _Kernel(grid, p, law, form)
    op = LinearOperator.for_grid(p, grid, half=True)
    bank = DyadicFilterBank(grid)
    times = np.linspace(0.0, T, steps + 1)
    a0, m0 = data.half()
    a0, m0 = a0 * kern.mask, m0 * kern.mask
    zeros_a = np.zeros((len(times),) + grid.half_shape, dtype=complex)
    zeros_m = np.zeros((len(times), grid.dim) + grid.half_shape, dtype=complex)

    def solve(f_m):
        out = duhamel(op, a0, m0, times, zeros_a, f_m)
        return np.stack([x[0] for x in out]), np.stack([x[1] for x in out])

    cur = solve(zeros_m)
    kept = [cur] if keep_iterates else []
    deltas, ratios = [], []
    for _ in range(iterations):
        f_m = np.stack([kern(at, mt) for at, mt in zip(*cur)])
        nxt = solve(f_m)
        deltas.append(_cl_norm(p, bank, times, nxt[0] - cur[0], nxt[1] - cur[1]))
        if len(deltas) >= 2:
            ratios.append(deltas[-1] / deltas[-2] if deltas[-2] > 0 else 0.0)
            if len(ratios) >= 3 and all(r >= 1 for r in ratios[-3:]):
                raise PicardDivergence(ratios)
        cur = nxt
        if keep_iterates:
            kept.append(cur)
    return PicardResult(times, deltas, ratios, cur, kept)


# --- scaling ------------------------------------------------------------------------


def scaling_invariance_probe(
    state: FluidState,
    nu_scale: float,
    p: FluidParams,
    law: PressureLaw,
    t: float,
    dt: float,
    nonlinear: bool = True,
    scheme: str = "etdrk2",
) -> float:
    """Relative mismatch between a run and its rescaled counterpart.

    The original runs for nu^2 t on the box L.  The rescaled data
    a_nu(x) = a(nu x), m_nu(x) = nu m(nu x) live on the box L / nu (same
    sample arrays) with pressure nu^2 P, and run for t with step dt / nu^2.
    """
    if nu_scale <= 0:
        raise ValueError("nu_scale must be positive")
    grid = state.grid
    g2 = make_grid(grid.dim, grid.n, grid.box_length / nu_scale)
    law2 = law.scaled(nu_scale**2)
    p2 = p.replace(gamma=law2.gamma)
    a, m = state.half()
    s1 = NSKSolver(grid, p, law, scheme=scheme, nonlinear=nonlinear, cfl=np.inf)
    s2 = NSKSolver(g2, p2, law2, scheme=scheme, nonlinear=nonlinear, cfl=np.inf)
    n_steps = int(round(nu_scale**2 * t / dt))
    a1, m1 = a * s1.kernel.mask, m * s1.kernel.mask
    a2, m2 = a1.copy(), nu_scale * m1
    h1, h2 = dt, dt / nu_scale**2
    for _ in range(n_steps):
        a1, m1 = s1.step_half(a1, m1, h1)
        a2, m2 = s2.step_half(a2, m2, h2)
    num = np.sqrt(np.sum(np.abs(a2 - a1) ** 2) + np.sum(np.abs(m2 - nu_scale * m1) ** 2))
    den = np.sqrt(np.sum(np.abs(a1) ** 2) + np.sum(np.abs(nu_scale * m1) ** 2))
    return float(num / den) if den > 0 else float(num)


# --- checkpoints and CSV -----------------------------------------------------------


def save_checkpoint(path, state: FluidState, p: FluidParams, law: PressureLaw | None = None):
    """npz container: half-lattice coefficients plus a JSON metadata record."""
    a, m = state.half()
    meta = {
        "format": "nsk-checkpoint-1",
        "grid": state.grid.describe(),
        "params": p.as_dict(),
        "law": law.describe() if law is not None else None,
        "time": state.time,
        "lattice": "rfft-half",
        "normalization": "ortho",
    }
    np.savez(Path(path), a_hat=a, m_hat=m, meta=np.array(json.dumps(meta)))


def load_checkpoint(path):
    """Returns (state, params, law or None)."""
    with np.load(Path(path)) as z:
        meta = json.loads(str(z["meta"]))
        a, m = z["a_hat"], z["m_hat"]
    if meta.get("format") != "nsk-checkpoint-1":
        raise ValueError("not an nsk checkpoint")
    grid = make_grid(**meta["grid"])
    params = FluidParams(**meta["params"])
    law = make_law(meta["law"]) if meta["law"] and meta["law"]["kind"] != "scaled" else None
    return FluidState.from_half(grid, a, m, meta["time"]), params, law


def write_diagnostics_csv(traj: Trajectory, path):
    cols = ["t", "mass", "l2_a", "l2_m", "min_rho"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for i, t in enumerate(traj.times):
            w.writerow([repr(float(t))] + [repr(float(traj.scalars[c][i])) for c in cols[1:]])
