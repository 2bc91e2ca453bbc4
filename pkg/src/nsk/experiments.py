"""Manifest-driven experiment runners shared by the command line and the acceptance tests."""
from __future__ import annotations

import csv
import json
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import decay_harness as dh
from .linear_analysis import (
    DISPERSION_COLUMNS,
    FluidParams,
    ParameterError,
    crossover_frequency,
    dispersion_table,
    maximal_regularity_probe,
    semigroup_decay_probe,
)
from .littlewood_paley import DyadicFilterBank, besov_norm
from .nsk_solver import (
    FluidState,
    NSKSolver,
    linear_trajectory,
    picard_solve,
    save_checkpoint,
    write_diagnostics_csv,
)
from .pressure import PressureLaw, make_law
from .spectral_core import Grid, SpectralField, forward, make_grid

PRNG_NAME = "PCG64"


class AssertionFailure(RuntimeError):
    """An experiment ran but a checked invariant or fit failed (exit code 3)."""


# --- building blocks ------------------------------------------------------------


def build_grid(spec: dict) -> Grid:
    return make_grid(spec["dim"], spec["n"], spec["box_length"])


def build_law(spec: dict | None) -> PressureLaw | None:
    return make_law(spec) if spec else None


def build_params(spec: dict, law: PressureLaw | None) -> FluidParams:
    """FluidParams from the manifest; gamma and rho_* come from the law when one is given."""
    kw = {
        "rho_star": spec.get("rho_star", 1.0),
        "mu": spec["mu"],
        "lam": spec.get("lambda", 0.0),
        "kappa": spec["kappa"],
        "gamma": spec.get("gamma", 0.0),
    }
    if law is not None:
        for key, value in (("rho_star", law.rho_star), ("gamma", law.gamma)):
            if key in spec and abs(spec[key] - value) > 1e-9 * max(1.0, abs(value)):
                raise ParameterError(f"params.{key} = {spec[key]} contradicts the pressure law value {value}")
            kw[key] = value
    return FluidParams(**kw)


def _center(grid: Grid):
    return [c - grid.box_length / 2 for c in grid.coordinates()]


def initial_data(grid: Grid, spec: dict, p: FluidParams, rng: np.random.Generator) -> FluidState:
    """Named generators: gaussian-bump, single-shell, random-band."""
    kind = spec["kind"]
    amp = spec.get("amplitude", 1e-2)
    mom = spec.get("momentum_amplitude", 0.0)
    d = grid.dim
    if kind == "gaussian-bump":
        width = spec.get("width", 1.0)
        xs = _center(grid)
        bump = np.exp(-sum(x * x for x in xs) / (2 * width**2))
        a = amp * p.rho_star * bump
        # a swirling-plus-radial momentum profile
        m = np.stack([mom * (xs[(i + 1) % d] - 0.5 * xs[i]) / width * bump for i in range(d)])
        return FluidState.from_physical(grid, a, m)
    if kind in ("single-shell", "random-band"):
        bank = DyadicFilterBank(grid)

        def shaped():
            white = forward(rng.standard_normal(grid.shape), grid).coefficients[0]
            if kind == "single-shell":
                j = spec["shell"]
                bank.check_index(j)
                filt = bank.weight(j)
            else:
                lo, hi = spec.get("band", [grid.k0, grid.n * grid.k0 / 4])
                filt = ((grid.kmag >= lo) & (grid.kmag <= hi)).astype(float)
            x = np.fft.ifftn(white * filt * grid.dealias_mask(), norm="ortho").real
            peak = np.abs(x).max()
            return x / peak if peak > 0 else x

        a = amp * p.rho_star * shaped()
        m = np.stack([mom * shaped() for _ in range(d)]) if mom else np.zeros((d,) + grid.shape)
        return FluidState.from_physical(grid, a, m)
    raise ValueError(f"unknown initial-data generator {kind!r}")


@dataclass
class RunResult:
    kind: str
    out_dir: Path
    files: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    passed: bool = True


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n")


def _write_rows(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


# --- experiment kinds -------------------------------------------------------------


def run_dispersion(m: dict, out: Path, rng) -> RunResult:
    law = build_law(m.get("pressure"))
    p = build_params(m["params"], law)
    ds = m.get("dispersion", {})
    xi = np.geomspace(ds.get("xi_min", 1e-2), ds.get("xi_max", 1e2), ds.get("samples", 201))
    rows = dispersion_table(p, xi)
    _write_rows(out / "dispersion.csv", DISPERSION_COLUMNS, rows)
    xs = crossover_frequency(p)
    summary = {"params": p.as_dict(), "crossover": xs, "rows": len(rows)}
    _write_json(out / "dispersion.json", summary)
    return RunResult("dispersion", out, ["dispersion.csv", "dispersion.json"], summary)


def _normalized_pair(grid, p, state: FluidState, s2: float):
    """Scale data so the pair ((gamma+Lambda)a, m) has unit B^{s2}_{2,inf} norm."""
    bank = DyadicFilterBank(grid)
    wa = state.a.with_coefficients((p.gamma + grid.kmag) * state.a.coefficients)
    pair = SpectralField(grid, np.concatenate([wa.coefficients, state.m.coefficients]))
    nrm = besov_norm(pair, s2, np.inf, bank).value
    return state.a * (1 / nrm), state.m * (1 / nrm)


def run_linear_decay(m: dict, out: Path, rng) -> RunResult:
    grid = build_grid(m["grid"])
    law = build_law(m.get("pressure"))
    p = build_params(m["params"], law)
    state = initial_data(grid, m["initial_data"], p, rng)
    cfg = m.get("linear_decay", {})
    s2 = cfg.get("s2", -grid.dim / 2)
    t_min, t_max = cfg.get("window", [5.0, 500.0])
    fits, rows = [], {}
    a0, m0 = _normalized_pair(grid, p, state, s2)
    for gap in cfg.get("gaps", [1.0, 2.0]):
        res = semigroup_decay_probe(p, s2 + gap, s2, a0, m0, t_min, t_max, cfg.get("samples", 60))
        fits.append({"s1": s2 + gap, "s2": s2, "fitted_slope": res.slope, "theoretical_slope": res.predicted,
                     "tolerance": 0.1, "pass": bool(res.passed)})
        rows[gap] = res
    gaps = sorted(rows)
    times = rows[gaps[0]].times
    _write_rows(out / "linear_decay.csv", ["t"] + [f"norm_s1={s2 + g:g}" for g in gaps],
                [[t] + [rows[g].norms[i] for g in gaps] for i, t in enumerate(times)])
    dh.write_fit_summary(out / "fits.json", fits)
    return RunResult("linear-decay", out, ["linear_decay.csv", "fits.json"], {"fits": fits}, all(f["pass"] for f in fits))


def maxreg_spread(grid: Grid, base: FluidParams, gammas, state: FluidState, T: float = 2.0, s: float = 0.0, forcing_amp: float = 1.0):
    """Maximal-regularity ratios for several gamma with identical data and forcing."""
    xs = _center(grid)
    env = np.exp(-sum(x * x for x in xs) / 2.0)
    times = np.linspace(0.0, T, 9)
    f = [forward(np.zeros(grid.shape), grid) for _ in times]
    g = [forward(np.stack([forcing_amp * np.cos(t) * env * xs[(i + 1) % grid.dim] for i in range(grid.dim)]), grid) for t in times]
    ratios = {}
    for gam in gammas:
        p = base.replace(gamma=gam)
        ratios[gam] = maximal_regularity_probe(p, state.a, state.m, times, f, g, T, s).ratio
    vals = list(ratios.values())
    return ratios, max(vals) / min(vals)


def run_maxreg(m: dict, out: Path, rng) -> RunResult:
    grid = build_grid(m["grid"])
    p = build_params(m["params"], None)
    state = initial_data(grid, m["initial_data"], p, rng)
    cfg = m.get("maxreg", {})
    ratios, spread = maxreg_spread(grid, p, cfg.get("gammas", [0.0, 0.1, 1.0, 10.0]), state, cfg.get("T", 2.0))
    summary = {"ratios": {str(k): v for k, v in ratios.items()}, "spread": spread, "pass": spread < 5.0}
    _write_json(out / "maxreg.json", summary)
    return RunResult("maxreg", out, ["maxreg.json"], summary, summary["pass"])


def _decay_fits(traj, cfg: dict, dim: int, gamma_mode: str, window):
    dcfg = dh.DecayFunctionalConfig(dim, s_grid=tuple(cfg["s_grid"]) if "s_grid" in cfg else None,
                                    epsilon=cfg.get("epsilon", 0.1), j0=cfg.get("j0"), gamma_mode=gamma_mode)
    series = dh.d_functional(traj, dcfg)
    weight = "gamma" if gamma_mode == "positive" else "lambda"
    fits = []
    for s in cfg.get("fit_s", [0.0]):
        t, v = dh.low_frequency_series(traj, s, series.j0, weight)
        idx = dh.log_subsample(t, cfg.get("per_decade", 20))
        fit = dh.fit_decay_exponent(t[idx], v[idx], window, -(s + dim / 2) / 2, cfg.get("tolerance", 0.1))
        fits.append(fit.summary(s=s, weight=weight, j0=series.j0))
    return series, fits


def run_nonlinear(m: dict, out: Path, rng) -> RunResult:
    grid = build_grid(m["grid"])
    law = build_law(m["pressure"])
    p = build_params(m["params"], law)
    state = initial_data(grid, m["initial_data"], p, rng)
    tc = m["time"]
    solver = NSKSolver(grid, p, law, form=tc.get("form", "standard"), scheme=tc.get("scheme", "etdrk2"))
    final, traj = solver.run(state, tc["t_end"], tc["dt"])
    write_diagnostics_csv(traj, out / "diagnostics.csv")
    save_checkpoint(out / "checkpoint.npz", final, p, law)
    files = ["diagnostics.csv", "checkpoint.npz"]
    mass = np.asarray(traj.scalars["mass"])
    summary = {"steps": len(traj) - 1, "mass_drift": float(np.abs(mass - mass[0]).max()),
               "min_rho": float(min(traj.scalars["min_rho"])), "params": p.as_dict(), "law": law.describe()}
    passed = True
    if "decay" in m:
        cfg = m["decay"]
        mode = "positive" if p.gamma > 0 else "zero"
        window = tuple(cfg.get("window", [5.0, tc["t_end"]]))
        series, fits = _decay_fits(traj, cfg, grid.dim, mode, window)
        series.to_csv(out / "decay.csv")
        w = (series.times >= window[0]) & (series.times <= window[1])
        d_ratio = float(series.values[w].max() / series.values[w].min())
        nondecreasing = bool(np.all(np.diff(series.values) >= -1e-12 * series.values.max()))
        summary.update({"fits": fits, "D_ratio": d_ratio, "D_nondecreasing": nondecreasing})
        if "slope_band" in cfg:
            lo, hi = cfg["slope_band"]
            for f in fits:
                f["pass"] = bool(lo <= f["fitted_slope"] <= hi)
        passed = all(f["pass"] for f in fits) and nondecreasing and d_ratio < cfg.get("max_D_ratio", np.inf)
        dh.write_fit_summary(out / "fits.json", fits)
        files += ["decay.csv", "fits.json"]
    summary["pass"] = passed
    _write_json(out / "summary.json", summary)
    return RunResult("nonlinear-run", out, files + ["summary.json"], summary, passed)


def _rel_state_error(x, y) -> float:
    num = np.sqrt(np.sum(np.abs(x[0] - y[0]) ** 2) + np.sum(np.abs(x[1] - y[1]) ** 2))
    den = np.sqrt(np.sum(np.abs(y[0]) ** 2) + np.sum(np.abs(y[1]) ** 2))
    return float(num / den)


def picard_vs_stepper(state: FluidState, p: FluidParams, law: PressureLaw, T: float = 1.0, iterations: int = 7, steps: int = 64) -> dict:
    """Compare the Picard limit with the ETDRK4 stepper at time T.

    Each route is run at two resolutions (``steps`` and ``2 steps`` samples
    or steps); the difference between its two answers is that route's
    self-convergence error, and the routes must agree within the sum.
    """
    grid = state.grid
    pic = [picard_solve(state, T, iterations, p, law, steps=n).state_at_end(grid).half() for n in (steps, 2 * steps)]
    solver = NSKSolver(grid, p, law, scheme="etdrk4")
    stp = [solver.run(state, T, T / n, trajectory=False)[0].half() for n in (steps, 2 * steps)]
    err_p = _rel_state_error(pic[0], pic[1])
    err_s = _rel_state_error(stp[0], stp[1])
    diff = _rel_state_error(pic[1], stp[1])
    return {"difference": diff, "picard_self": err_p, "stepper_self": err_s, "pass": bool(diff <= err_p + err_s)}


def run_picard(m: dict, out: Path, rng) -> RunResult:
    grid = build_grid(m["grid"])
    law = build_law(m["pressure"])
    p = build_params(m["params"], law)
    state = initial_data(grid, m["initial_data"], p, rng)
    cfg = m.get("picard", {})
    res = picard_solve(state, cfg.get("T", 1.0), cfg.get("iterations", 7), p, law, steps=cfg.get("steps", 64))
    ratios = res.ratios
    summary = {"deltas": res.deltas, "ratios": ratios}
    if cfg.get("compare_stepper", True):
        summary["stepper"] = picard_vs_stepper(state, p, law, cfg.get("T", 1.0), cfg.get("iterations", 7), cfg.get("steps", 64))
    passed = all(r < 0.5 for r in ratios) and summary.get("stepper", {}).get("pass", True)
    summary["pass"] = passed
    _write_json(out / "picard.json", summary)
    return RunResult("picard", out, ["picard.json"], summary, passed)


def run_decay_suite(m: dict, out: Path, rng) -> RunResult:
    """Linear-flow decay of low-frequency B^s norms against -(s + d/2)/2."""
    grid = build_grid(m["grid"])
    law = build_law(m.get("pressure"))
    p = build_params(m["params"], law)
    state = initial_data(grid, m["initial_data"], p, rng)
    cfg = m.get("decay", {})
    t_end = cfg.get("t_end", 200.0)
    times = np.concatenate([[0.0], np.geomspace(1e-2, t_end, cfg.get("samples", 161))])
    traj = linear_trajectory(grid, p, state.a, state.m, times)
    mode = "positive" if p.gamma > 0 else "zero"
    cfg = {"fit_s": [0.0, 0.5, 1.0], **cfg}
    series, fits = _decay_fits(traj, cfg, grid.dim, mode, tuple(cfg.get("window", [5.0, t_end])))
    series.to_csv(out / "decay.csv")
    dh.write_fit_summary(out / "fits.json", fits)
    passed = all(f["pass"] for f in fits)
    return RunResult("decay-suite", out, ["decay.csv", "fits.json"], {"fits": fits, "pass": passed}, passed)


def appendix_results(t_max: float = 1000.0) -> dict:
    conv = {}
    for a, b in [(2.0, 2.0), (2.0, 0.5), (1.5, 3.0), (0.5, 0.5)]:
        c = dh.convolution_inequality_check(a, b, t_max)
        conv[f"{a:g},{b:g}"] = {"constants": {f"{k:g}": v for k, v in c.constants.items()},
                                "relative_change": c.relative_change, "bounded": c.bounded,
                                "precondition": c.precondition}
    unif = {}
    for r, c0 in [(1.0, 1.0), (4.0, 1.0), (1.0, 2.0)]:
        u = dh.uniform_bound_check(r, c0)
        unif[f"{r:g},{c0:g}"] = {"sup": u.sup, "interior": u.interior, "shift_residual": u.shift_residual,
                                 "decade_spread": u.decade_spread}
    ok_conv = all(v["bounded"] == v["precondition"] for v in conv.values())
    ok_unif = all(v["interior"] and v["decade_spread"] < 0.01 and v["shift_residual"] < 1e-12 for v in unif.values())
    return {"convolution": conv, "uniform_bound": unif, "pass": ok_conv and ok_unif}


def run_appendix(m: dict, out: Path, rng) -> RunResult:
    res = appendix_results(m.get("appendix", {}).get("t_max", 1000.0))
    _write_json(out / "appendix.json", res)
    return RunResult("appendix-checks", out, ["appendix.json"], res, res["pass"])


RUNNERS = {
    "dispersion": run_dispersion,
    "linear-decay": run_linear_decay,
    "maxreg": run_maxreg,
    "nonlinear-run": run_nonlinear,
    "picard": run_picard,
    "decay-suite": run_decay_suite,
    "appendix-checks": run_appendix,
}


def run_manifest(manifest: dict, out_dir, seed: int | None = None) -> RunResult:
    """Execute one validated manifest, writing artifacts plus run.json into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = int(manifest.get("seed", 0) if seed is None else seed)
    rng = np.random.Generator(np.random.PCG64(seed))
    res = RUNNERS[manifest["kind"]](manifest, out, rng)
    _write_json(out / "run.json", {
        "kind": manifest["kind"],
        "seed": seed,
        "prng": PRNG_NAME,
        "manifest": manifest,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "files": res.files,
        "pass": res.passed,
    })
    return res
