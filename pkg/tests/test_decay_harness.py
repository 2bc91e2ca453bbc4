import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.special import gamma as gamma_fn

from nsk import decay_harness as dh
from nsk.linear_analysis import FluidParams
from nsk.littlewood_paley import ShellTrace
from nsk.nsk_solver import linear_trajectory
from nsk.spectral_core import SpectralField, forward, make_grid, project


def test_synthetic_power_law():
    t = np.geomspace(5, 500, 30)
    fit = dh.fit_decay_exponent(t, 3.7 * t**-0.83, theoretical=-0.8, tolerance=0.1)
    assert fit.fitted_slope == pytest.approx(-0.83, abs=1e-10)
    assert fit.passed
    assert not dh.fit_decay_exponent(t, t**-0.5, theoretical=-0.8, tolerance=0.1).passed


def test_fit_guards():
    t = np.geomspace(5, 500, 7)
    with pytest.raises(ValueError, match="at least 8"):
        dh.fit_decay_exponent(t, t**-1.0)
    t = np.geomspace(1, 40, 20)
    with pytest.raises(ValueError, match="decade"):
        dh.fit_decay_exponent(t, t**-1.0)  # only [5, 40] survives the transient cut
    t = np.geomspace(5, 500, 20)
    with pytest.raises(ValueError, match="positive"):
        dh.fit_decay_exponent(t, -t)


def test_transient_samples_are_ignored():
    t = np.geomspace(0.1, 500, 60)
    v = np.where(t < 5, 1e6, t**-0.5)
    assert dh.fit_decay_exponent(t, v, window=(0.0, 500)).fitted_slope == pytest.approx(-0.5, abs=1e-10)


def test_log_subsample():
    t = np.linspace(0, 100, 100001)
    idx = dh.log_subsample(t, 20)
    picked = t[idx]
    assert picked[0] > 0 and np.all(np.diff(picked) > 0)
    # the uniform samples are too sparse in [1e-3, 1e-2]; later decades get 20 each
    per_decade = np.histogram(np.log10(picked), bins=[-3, -2, -1, 0, 1, 2.0001])[0]
    assert per_decade[0] <= 10 and all(19 <= c <= 21 for c in per_decade[1:])
    assert len(dh.log_subsample(np.zeros(3))) == 0


def test_config_validation():
    cfg = dh.DecayFunctionalConfig(2)
    assert len(cfg.s_grid) == 5 and all(-1 < s <= 2 for s in cfg.s_grid)
    assert cfg.alpha == pytest.approx(1.4)
    with pytest.raises(ValueError):
        dh.DecayFunctionalConfig(2, s_grid=(-1.0,))
    with pytest.raises(ValueError):
        dh.DecayFunctionalConfig(2, gamma_mode="negative")
    with pytest.raises(ValueError):
        dh.DecayFunctionalConfig(2, epsilon=0.0)


def test_default_j0():
    js = np.arange(-4, 6)
    assert dh.default_j0(js, 1.0) == 0
    assert dh.default_j0(np.arange(2, 6), 1.0) == 2
    assert dh.default_j0(js, 0.0) == 1


def fake_trajectory(times, js, low, high, gamma=1.0, dim=2):
    """Stands in for a Trajectory: only pair_trace, grid.dim and params.gamma are used."""
    traces = {0: ShellTrace(times, js, low), 2: ShellTrace(times, js, high)}
    return SimpleNamespace(
        grid=SimpleNamespace(dim=dim),
        params=SimpleNamespace(gamma=gamma),
        pair_trace=lambda weight, power: traces[power],
    )


def test_zero_trajectory_gives_zero():
    times = np.linspace(0, 10, 11)
    js = np.arange(-3, 4)
    traj = fake_trajectory(times, js, np.zeros((11, 7)), np.zeros((11, 7)))
    assert np.all(dh.d_functional(traj, dh.DecayFunctionalConfig(2)).values == 0)


def test_single_shell_closed_form():
    """One low shell j = -1 with trace e^{-t/4}; one high shell j = 2 with trace e^{-t}."""
    times = np.linspace(0, 20, 401)
    js = np.arange(-2, 4)
    low = np.zeros((len(times), len(js)))
    high = np.zeros_like(low)
    low[:, 1] = np.exp(-times / 4)
    high[:, 4] = np.exp(-times)
    cfg = dh.DecayFunctionalConfig(2, s_grid=(0.0, 1.0), j0=0)
    out = dh.d_functional(fake_trajectory(times, js, low, high), cfg)
    jt = np.sqrt(1 + times**2)
    lows = [np.maximum.accumulate(jt ** ((s + 1) / 2) * 2.0 ** (-s) * np.exp(-times / 4)) for s in (0.0, 1.0)]
    hi = np.maximum.accumulate(times**cfg.alpha * np.exp(-times)) * 2.0 ** (0 * 2)
    assert np.allclose(out.values, np.maximum(*lows) + hi, rtol=1e-14)


def test_gamma_zero_mode_needs_gamma_zero():
    times = np.linspace(0, 1, 3)
    js = np.arange(-1, 2)
    traj = fake_trajectory(times, js, np.ones((3, 3)), np.ones((3, 3)), gamma=1.0)
    with pytest.raises(ValueError):
        dh.d_functional(traj, dh.DecayFunctionalConfig(2, gamma_mode="zero"))
    with pytest.raises(ValueError):
        dh.d_functional(traj, dh.DecayFunctionalConfig(3))


def test_linear_flow_keeps_d_bounded():
    g = make_grid(2, 128, 50.0)
    p = FluidParams(1.0, 1.0, 0.0, 1.0, 1.0)
    x, y = (c - 25.0 for c in g.coordinates())
    a = forward(np.exp(-(x**2 + y**2) / 2), g)
    times = np.concatenate([[0.0], np.geomspace(1e-2, 100, 121)])
    traj = linear_trajectory(g, p, a, SpectralField.zeros(g, 2), times)
    d = dh.d_functional(traj, dh.DecayFunctionalConfig(2)).values
    assert np.all(np.isfinite(d))
    late = d[times >= 10]
    assert late[-1] / late[0] < 1.05  # the running sup has saturated


def test_heat_semigroup_slope():
    """Solenoidal data in B^{-1}_{2,inf}: the low B^0 norm decays like t^{-1/2}.

    The box must be wide compared with sqrt(4 t) up to t = 200, hence L = 400.
    """
    g = make_grid(2, 256, 400.0)
    p = FluidParams(1.0, 1.0, 0.0, 1.0, 1.0)
    x, y = (c - 200.0 for c in g.coordinates())
    env = np.exp(-(x**2 + y**2) / 8)
    w, _ = project(forward(np.stack([env, 0 * env]), g))
    times = np.concatenate([[0.0], np.geomspace(1e-2, 200, 141)])
    traj = linear_trajectory(g, p, SpectralField.zeros(g), w, times)
    t, v = dh.low_frequency_series(traj, 0.0, 0)
    fit = dh.fit_decay_exponent(t, v, (5.0, 200.0), -0.5)
    assert fit.fitted_slope == pytest.approx(-0.5, abs=0.1)


@pytest.mark.parametrize("a,b", [(2.0, 2.0), (2.0, 0.5), (1.5, 3.0)])
def test_convolution_constants_stable(a, b):
    c = dh.convolution_inequality_check(a, b, 1000.0)
    assert c.precondition and c.bounded
    assert c.relative_change < 0.05


def test_convolution_without_precondition_grows():
    c = dh.convolution_inequality_check(0.5, 0.5, 1000.0)
    assert not c.precondition and not c.bounded


def test_convolution_quadrature_against_closed_form():
    """a = b = 0 is a plain length: int_0^t 1 = t."""
    assert dh._conv_integral(0.0, 0.0, 7.5) == pytest.approx(7.5, rel=1e-12)


@pytest.mark.parametrize("r,c0", [(1.0, 1.0), (4.0, 1.0), (1.0, 2.0)])
def test_uniform_bound(r, c0):
    u = dh.uniform_bound_check(r, c0)
    assert np.isfinite(u.sup) and u.interior
    assert u.shift_residual < 1e-12
    assert u.decade_spread < 0.01
    # the dyadic sum is a Riemann sum (step ln 4) of Gamma(r/2) c0^{-r/2}
    assert u.sup == pytest.approx(gamma_fn(r / 2) * c0 ** (-r / 2) / math.log(4), rel=0.05)


def test_uniform_bound_ordering():
    base = dh.uniform_bound_check(1.0, 1.0).sup
    assert dh.uniform_bound_check(1.0, 2.0).sup < base
    # larger r gives a smaller sup here, since Gamma(2) < Gamma(1/2)
    assert dh.uniform_bound_check(4.0, 1.0).sup < base
    with pytest.raises(ValueError):
        dh.uniform_bound_check(0.0, 1.0)


def test_series_csv(tmp_path):
    times = np.linspace(0, 1, 3)
    s = dh.DecaySeries(times, {0.0: np.ones(3)}, np.zeros(3), np.ones(3), 0)
    s.to_csv(tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == "t,low_s=0,high,D"
