import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from nsk.cli import EXIT_ASSERT, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main

MANIFESTS = Path(__file__).resolve().parents[1] / "manifests"

SMALL = {
    "kind": "nonlinear-run",
    "seed": 99,
    "grid": {"dim": 2, "n": 16, "box_length": 6.283185307179586},
    "params": {"mu": 1.0, "lambda": 0.0, "kappa": 1.0},
    "pressure": {"kind": "polytropic", "coeff": 1.0, "exponent": 1.4, "rho_star": 1.0},
    "initial_data": {"kind": "random-band", "amplitude": 0.01, "momentum_amplitude": 0.01, "band": [1.0, 4.0]},
    "time": {"t_end": 0.2, "dt": 0.05},
}


def write(tmp_path, data, name="m.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def test_run_small_manifest(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["--out", str(out), "run", str(write(tmp_path, SMALL))]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["pass"] and (out / "diagnostics.csv").exists() and (out / "checkpoint.npz").exists()
    run = json.loads((out / "run.json").read_text())
    assert run["seed"] == 99 and run["prng"] == "PCG64"


def test_same_seed_same_bytes(tmp_path):
    path = write(tmp_path, SMALL)
    for name in ("a", "b"):
        assert main(["--out", str(tmp_path / name), "run", str(path)]) == EXIT_OK
    assert (tmp_path / "a/diagnostics.csv").read_bytes() == (tmp_path / "b/diagnostics.csv").read_bytes()
    assert main(["--seed", "5", "--out", str(tmp_path / "c"), "run", str(path)]) == EXIT_OK
    assert (tmp_path / "c/diagnostics.csv").read_bytes() != (tmp_path / "a/diagnostics.csv").read_bytes()


def test_json_manifest_is_accepted(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps(SMALL))
    assert main(["--out", str(tmp_path / "o"), "run", str(path)]) == EXIT_OK


def test_invalid_viscosity_is_a_config_error(tmp_path, capsys):
    bad = {**SMALL, "params": {"mu": -1.0, "lambda": 0.0, "kappa": 1.0}}
    assert main(["--out", str(tmp_path / "o"), "run", str(write(tmp_path, bad))]) == EXIT_CONFIG
    assert "mu > 0 required" in capsys.readouterr().err


def test_schema_violation_names_the_path(tmp_path, capsys):
    bad = {**SMALL, "grid": {"dim": 4, "n": 16, "box_length": 1.0}}
    assert main(["run", str(write(tmp_path, bad))]) == EXIT_CONFIG
    assert "/grid/dim" in capsys.readouterr().err


def test_missing_and_unparsable_manifests(tmp_path):
    assert main(["run", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG
    broken = tmp_path / "broken.yaml"
    broken.write_text("kind: [unclosed")
    assert main(["run", str(broken)]) == EXIT_CONFIG


def test_gamma_law_mismatch_is_a_config_error(tmp_path):
    bad = {**SMALL, "params": {**SMALL["params"], "gamma": 3.0}}
    assert main(["--out", str(tmp_path / "o"), "run", str(write(tmp_path, bad))]) == EXIT_CONFIG


def test_vacuum_exits_with_assertion_code(tmp_path, capsys):
    heavy = {**SMALL, "initial_data": {"kind": "gaussian-bump", "amplitude": -0.97, "width": 1.0}}
    assert main(["--out", str(tmp_path / "o"), "run", str(write(tmp_path, heavy))]) == EXIT_ASSERT
    assert "vacuum" in capsys.readouterr().err


def test_threads_must_be_positive():
    assert main(["--threads", "0", "check"]) == EXIT_CONFIG


def test_plot_on_empty_directory(tmp_path, capsys):
    assert main(["plot", str(tmp_path)]) == EXIT_RUNTIME
    assert "no plottable results" in capsys.readouterr().err


def test_plot_scripts_for_dispersion(tmp_path, capsys):
    out = tmp_path / "disp"
    assert main(["--out", str(out), "run", str(MANIFESTS / "dispersion.yaml")]) == EXIT_OK
    capsys.readouterr()
    assert main(["plot", str(out)]) == EXIT_OK
    written = capsys.readouterr().out.split()
    assert {Path(p).name for p in written} == {"plot_dispersion.py", "plot_regime_map.py"}
    for p in written:
        compile(Path(p).read_text(), p, "exec")


def test_plot_scripts_for_decay(tmp_path, capsys):
    run = {**SMALL, "time": {"t_end": 60.0, "dt": 0.5}, "decay": {"fit_s": [0.0, 0.5], "window": [5.0, 60.0]}}
    out = tmp_path / "dec"
    main(["--out", str(out), "run", str(write(tmp_path, run))])
    capsys.readouterr()
    assert (out / "decay.csv").exists()
    assert main(["plot", str(out)]) == EXIT_OK
    # one script per regularity index on the D-functional grid, s in (-1, 2] for d = 2
    names = sorted(Path(p).name for p in capsys.readouterr().out.split())
    header = (out / "decay.csv").read_text().splitlines()[0].split(",")
    assert len(names) == sum(c.startswith("low_s=") for c in header) == 5
    assert "plot_decay_s2.py" in names
    assert "slope -1.5" in (out / "plot_decay_s2.py").read_text()


@pytest.mark.parametrize("name", ["dispersion.yaml", "maxreg.yaml", "appendix.yaml", "random_band_small.yaml"])
def test_shipped_manifests_validate_and_run(tmp_path, name):
    assert main(["--out", str(tmp_path / "o"), "run", str(MANIFESTS / name)]) == EXIT_OK


def test_every_shipped_manifest_matches_the_schema():
    from nsk.cli import load_manifest

    for path in sorted(MANIFESTS.glob("*.yaml")):
        load_manifest(path)


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "nsk.cli", "plot", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == EXIT_RUNTIME
