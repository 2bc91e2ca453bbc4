"""Command line: ``nsk run <manifest>``, ``nsk plot <dir>``, ``nsk check``.

Exit codes: 0 pass, 1 runtime failure, 2 configuration error, 3 failed
assertion or invariant.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import scipy.fft
import yaml

from .linear_analysis import ParameterError
from .nsk_solver import PicardDivergence, SolverError, VacuumError

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_ASSERT = 0, 1, 2, 3

log = logging.getLogger("nsk")


class ConfigError(ValueError):
    pass


def load_schema() -> dict:
    return json.loads(resources.files("nsk").joinpath("schema/manifest.schema.json").read_text())


def load_manifest(path) -> dict:
    """Read YAML or JSON and validate against the shipped schema."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"manifest not found: {path}")
    text = path.read_text()
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    validate_manifest(data)
    return data


def validate_manifest(data) -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"  at /{'/'.join(map(str, e.absolute_path))}: {e.message}" for e in errors]
        raise ConfigError("manifest does not match the schema:\n" + "\n".join(lines))


# --- plot scripts ---------------------------------------------------------------

_DECAY_TEMPLATE = '''"""Log-log decay of the low-frequency norm for s = {s:g} with reference slope {slope:g}."""
import csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

with open("decay.csv") as fh:
    rows = list(csv.DictReader(fh))
t = np.array([float(r["t"]) for r in rows])
v = np.array([float(r["{col}"]) for r in rows])
sel = t > 0
fig, ax = plt.subplots()
ax.loglog(t[sel], v[sel], label="weighted low norm, running sup")
ref = t[sel] ** ({slope:g})
ax.loglog(t[sel], ref * v[sel][-1] / ref[-1], "--", label="slope {slope:g}")
ax.set_xlabel("t")
ax.legend()
fig.savefig("decay_s{tag}.png", dpi=120)
'''

_LINEAR_TEMPLATE = '''"""Semigroup decay norms with reference slopes."""
import csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

with open("linear_decay.csv") as fh:
    reader = csv.reader(fh)
    header = next(reader)
    data = np.array([[float(x) for x in r] for r in reader])
fig, ax = plt.subplots()
for i, name in enumerate(header[1:], start=1):
    ax.loglog(data[:, 0], data[:, i], label=name)
ax.set_xlabel("t")
ax.legend()
fig.savefig("linear_decay.png", dpi=120)
'''

_DISPERSION_TEMPLATE = '''"""Real and imaginary parts of both eigenvalue branches; the crossover is marked."""
import csv
import json
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

with open("dispersion.csv") as fh:
    rows = list(csv.DictReader(fh))
xi = np.array([float(r["xi_mag"]) for r in rows])
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
for branch in ("plus", "minus"):
    ax1.loglog(xi, -np.array([float(r["re_lambda_" + branch]) for r in rows]), label="-Re lambda_" + branch)
    ax2.semilogx(xi, [float(r["im_lambda_" + branch]) for r in rows], label="Im lambda_" + branch)
crossover = json.load(open("dispersion.json"))["crossover"]
if crossover:
    for ax in (ax1, ax2):
        ax.axvline(crossover, color="k", ls=":", label="crossover")
ax1.set_xlabel("|xi|")
ax2.set_xlabel("|xi|")
ax1.legend()
ax2.legend()
fig.savefig("dispersion.png", dpi=120)
'''

_REGIME_TEMPLATE = '''"""Regime map over (|xi|, gamma) for the recorded rho_*, nu, kappa."""
import json
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

p = json.load(open("dispersion.json"))["params"]
nu_bar = (2 * p["mu"] + p["lam"]) / p["rho_star"]
xi = np.geomspace(1e-2, 1e2, 300)
gam = np.geomspace(1e-3, 1e2, 300)
X, G = np.meshgrid(xi, gam)
rad = 1 - 4 * p["kappa"] * p["rho_star"] / nu_bar**2 - 4 * G / (nu_bar**2 * X**2)
fig, ax = plt.subplots()
ax.contourf(X, G, np.sign(rad), levels=[-1.5, 0, 1.5], colors=["tab:blue", "tab:orange"])
ax.contour(X, G, rad, levels=[0], colors="k")
ax.set_xscale("log")
ax.set_yscale("log")
ax.set_xlabel("|xi|")
ax.set_ylabel("gamma")
ax.set_title("blue: complex pair, orange: real pair, line: double root")
fig.savefig("regime_map.png", dpi=120)
'''

PLOT_INPUTS = ("decay.csv", "linear_decay.csv", "dispersion.csv")


def emit_plots(result_dir) -> list[Path]:
    """Write self-contained matplotlib scripts next to the result files."""
    d = Path(result_dir)
    if not d.is_dir() or not any((d / f).exists() for f in PLOT_INPUTS):
        raise FileNotFoundError(f"no plottable results in {d}; expected one of: {', '.join(PLOT_INPUTS)}")
    written = []
    if (d / "decay.csv").exists():
        header = (d / "decay.csv").read_text().splitlines()[0].split(",")
        run = json.loads((d / "run.json").read_text()) if (d / "run.json").exists() else {}
        dim = run.get("manifest", {}).get("grid", {}).get("dim", 2)
        for col in header:
            if col.startswith("low_s="):
                s = float(col.split("=")[1])
                tag = f"{s:g}".replace("-", "m").replace(".", "p")
                path = d / f"plot_decay_s{tag}.py"
                path.write_text(_DECAY_TEMPLATE.format(s=s, col=col, slope=-(s + dim / 2) / 2, tag=tag))
                written.append(path)
    if (d / "linear_decay.csv").exists():
        path = d / "plot_linear_decay.py"
        path.write_text(_LINEAR_TEMPLATE)
        written.append(path)
    if (d / "dispersion.csv").exists():
        for name, body in (("plot_dispersion.py", _DISPERSION_TEMPLATE), ("plot_regime_map.py", _REGIME_TEMPLATE)):
            (d / name).write_text(body)
            written.append(d / name)
    return written


# --- commands ---------------------------------------------------------------------


def cmd_run(args) -> int:
    from .experiments import run_manifest

    try:
        manifest = load_manifest(args.manifest)
        out = args.out or manifest.get("output") or f"results/{Path(args.manifest).stem}"
        res = run_manifest(manifest, out, seed=args.seed)
    except (ConfigError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (VacuumError, PicardDivergence) as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except (SolverError, ValueError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps({"kind": res.kind, "out": str(res.out_dir), "pass": res.passed, "files": res.files}))
    return EXIT_OK if res.passed else EXIT_ASSERT


def cmd_plot(args) -> int:
    try:
        paths = emit_plots(args.dir)
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_RUNTIME
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_check(args) -> int:
    from .checks import full_suite

    results = full_suite()
    for r in results:
        print(r.line())
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "checks.json").write_text(
            json.dumps([{"name": r.name, "pass": r.passed, "value": r.value, "threshold": r.threshold} for r in results], indent=2)
        )
    return EXIT_OK if all(r.passed for r in results) else EXIT_ASSERT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nsk", description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    ap.add_argument("--seed", type=int, default=None, help="64-bit PCG64 seed (overrides the manifest)")
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment manifest (YAML or JSON)")
    r.add_argument("manifest")
    r.set_defaults(func=cmd_run)
    p = sub.add_parser("plot", help="write plotting scripts for a result directory")
    p.add_argument("dir")
    p.set_defaults(func=cmd_plot)
    c = sub.add_parser("check", help="run the appendix and invariant suite")
    c.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("configuration error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    with scipy.fft.set_workers(args.threads):
        return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
