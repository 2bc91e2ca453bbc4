import numpy as np
import pytest
import sympy as sp

from nsk.linear_analysis import FluidParams, ParameterError, propagate_linear
from nsk.nsk_solver import (
    FluidState,
    NSKSolver,
    PicardDivergence,
    StepRejected,
    VacuumError,
    conserved_mass,
    korteweg_div,
    load_checkpoint,
    nonlinear_rhs,
    picard_solve,
    save_checkpoint,
    scaling_invariance_probe,
    write_diagnostics_csv,
)
from nsk.pressure import PolytropicLaw, VanDerWaalsLaw
from nsk.spectral_core import SpectralField, forward, inverse, make_grid

X, Y = sp.symbols("x y", real=True)


def smooth_data(amp, rho_star=1.0):
    """Symbolic periodic test fields on [0, 2 pi)^2."""
    b = amp * rho_star * (sp.sin(X) * sp.cos(Y) + sp.Rational(1, 2) * sp.cos(2 * X + Y))
    n = (amp * (sp.cos(X + Y) + sp.sin(Y)), amp * (sp.sin(X) - sp.cos(2 * Y)))
    return b, n


def full_minus_linear(b, n, p, law):
    """N from the full momentum equation minus its linear part, done symbolically."""
    rs, kap, g = p.rho_star, p.kappa, p.gamma
    rho = rs + b
    r = sp.Symbol("r", positive=True)
    P = sp.sympify(law.coeff) * r**law.exponent if isinstance(law, PolytropicLaw) else (
        r * law.temperature / (1 - law.covolume * r) - law.attraction * r**2
    )
    dP = sp.diff(P, r).subs(r, rho)

    def grad(f):
        return [sp.diff(f, X), sp.diff(f, Y)]

    def div(v):
        return sp.diff(v[0], X) + sp.diff(v[1], Y)

    def lap(f):
        return sp.diff(f, X, 2) + sp.diff(f, Y, 2)

    def lame(v):
        gd = grad(div(v))
        return [p.mu * lap(v[i]) + (p.mu + p.lam) * gd[i] for i in range(2)]

    u = [n[0] / rho, n[1] / rho]
    conv = [div([n[i] * u[0], n[i] * u[1]]) for i in range(2)]
    full = [-conv[i] - dP * grad(b)[i] + lame(u)[i] + kap * rho * grad(lap(b))[i] for i in range(2)]
    linear = [lame(n)[i] / rs + kap * rs * grad(lap(b))[i] - g * grad(b)[i] for i in range(2)]
    return [full[i] - linear[i] for i in range(2)]


def sample(expr, grid):
    x, y = grid.coordinates()
    return sp.lambdify((X, Y), expr, "numpy")(x, y) + 0 * x


@pytest.mark.parametrize("form", ["standard", "divergence"])
@pytest.mark.parametrize("law", [PolytropicLaw(1 / 1.4, 1.4, 1.0), VanDerWaalsLaw()])
def test_forcing_matches_symbolic_oracle(form, law):
    g = make_grid(2, 64, 2 * np.pi)
    p = FluidParams(law.rho_star, 0.8, 0.3, 1.2, law.gamma)
    b, n = smooth_data(0.05, law.rho_star)
    exact = full_minus_linear(b, n, p, law)
    st = FluidState.from_physical(g, sample(b, g), np.stack([sample(c, g) for c in n]))
    got = inverse(nonlinear_rhs(st.a, st.m, p, law, form))
    ref = np.stack([sample(e, g) for e in exact])
    assert np.abs(got - ref).max() <= 1e-9 * np.abs(ref).max()


def test_forcing_vanishes_for_constant_b_and_zero_n():
    g = make_grid(2, 16, 2 * np.pi)
    law = PolytropicLaw(1 / 1.4, 1.4, 1.0)
    p = FluidParams(1.0, 1.0, 0.0, 1.0, law.gamma)
    st = FluidState.from_physical(g, np.full(g.shape, 0.1), np.zeros((2,) + g.shape))
    assert np.abs(nonlinear_rhs(st.a, st.m, p, law).coefficients).max() < 1e-14


def test_korteweg_forms_agree_and_vanish_for_zero():
    g = make_grid(2, 64, 2 * np.pi)
    p = FluidParams(1.0, 1.0, 0.0, 0.7, 1.0)
    b, _ = smooth_data(0.1)
    a = forward(sample(b, g), g)
    t, i = korteweg_div(a, p, "tensor").coefficients, korteweg_div(a, p, "identity").coefficients
    assert np.abs(t - i).max() <= 1e-9 * np.abs(i).max()
    assert np.abs(korteweg_div(SpectralField.zeros(g), p).coefficients).max() == 0


def test_law_and_params_must_agree():
    law = PolytropicLaw(1.0, 1.4, 1.0)
    g = make_grid(2, 16, 2 * np.pi)
    with pytest.raises(ParameterError, match="gamma"):
        NSKSolver(g, FluidParams(1.0, 1.0, 0.0, 1.0, 0.5), law)


def make_solver(n=32, scheme="etdrk2", nonlinear=True, mu=1.0):
    g = make_grid(2, n, 2 * np.pi)
    law = PolytropicLaw(1 / 1.4, 1.4, 1.0)
    p = FluidParams(1.0, mu, 0.0, 1.0, law.gamma)
    return NSKSolver(g, p, law, scheme=scheme, nonlinear=nonlinear), g, p, law


def smooth_state(g, amp):
    b, n = smooth_data(amp)
    return FluidState.from_physical(g, sample(b, g), np.stack([sample(c, g) for c in n]))


def test_linear_step_is_exact_flow():
    s, g, p, _ = make_solver(nonlinear=False)
    st = smooth_state(g, 0.3)
    out = s.step(st, 0.37)
    a_ref, m_ref = propagate_linear(st.a, st.m, p, 0.37)
    mask = g.dealias_mask()
    assert np.abs(out.a.coefficients - a_ref.coefficients * mask).max() < 1e-12
    assert np.abs(out.m.coefficients - m_ref.coefficients * mask).max() < 1e-12


def _endpoint(solver, st, t, n):
    return solver.run(st, t, t / n, trajectory=False)[0].half()


def _diff(x, y):
    return np.sqrt(np.sum(np.abs(x[0] - y[0]) ** 2) + np.sum(np.abs(x[1] - y[1]) ** 2))


@pytest.mark.parametrize("scheme,order", [("etdrk2", 2), ("etdrk4", 4)])
def test_global_order_by_self_convergence(scheme, order):
    s, g, _, _ = make_solver(scheme=scheme)
    st = smooth_state(g, 0.2)
    # the capillary term makes large steps pre-asymptotic, so the windows are short
    t = 0.05 if scheme == "etdrk2" else 0.1
    u1, u2, u3 = (_endpoint(s, st, t, n) for n in (4, 8, 16))
    observed = np.log2(_diff(u1, u2) / _diff(u2, u3))
    assert observed == pytest.approx(order, abs=0.3)


def test_local_error_order():
    s, g, _, _ = make_solver()
    st = smooth_state(g, 0.2)
    a, m = st.half()
    a, m = a * s.kernel.mask, m * s.kernel.mask
    ref = s.__class__(g, s.params, s.law, scheme="etdrk4")
    errs = []
    for h in (0.004, 0.002):
        one = s.step_half(a, m, h)
        fine = (a, m)
        for _ in range(8):
            fine = ref.step_half(*fine, h / 8)
        errs.append(_diff(one, fine))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(3.0, abs=0.3)


def test_mass_is_conserved():
    s, g, _, _ = make_solver()
    st = smooth_state(g, 0.1)
    a, m = st.half()
    a[0, 0] += 0.01 * g.n  # mean 0.01 under the unitary transform
    st = FluidState.from_half(g, a, m)
    m0 = conserved_mass(st)
    assert m0 == pytest.approx(0.01, rel=1e-12)
    final, traj = s.run(st, 10.0, 0.01)
    assert abs(conserved_mass(final) - m0) < 1e-14
    assert np.ptp(traj.scalars["mass"]) < 1e-14


def test_linear_consistency_is_quadratic():
    s_nl, g, _, _ = make_solver()
    s_lin = make_solver(nonlinear=False)[0]
    dev = []
    for eps in (1e-2, 1e-3):
        st = smooth_state(g, eps)
        u_nl = s_nl.run(st, 1.0, 0.05, trajectory=False)[0].half()
        u_li = s_lin.run(st, 1.0, 0.05, trajectory=False)[0].half()
        dev.append(_diff(u_nl, u_li))
    assert 50 <= dev[0] / dev[1] <= 150


def test_vacuum_guard():
    s, g, _, _ = make_solver()
    st = FluidState.from_physical(g, -0.95 * np.cos(sum(g.coordinates())) ** 2, np.zeros((2,) + g.shape))
    with pytest.raises(VacuumError, match="vacuum"):
        s.step(st, 0.01)


def test_dt_rejection():
    s, g, _, _ = make_solver()
    st = smooth_state(g, 0.2)
    with pytest.raises(StepRejected):
        s.step(st, 0.0)
    with pytest.raises(StepRejected, match="CFL"):
        s.step(st, 100.0)
    final, _ = s.run(st, 1.0, 100.0, trajectory=False)  # run() halves instead
    assert final.time == pytest.approx(1.0)


def test_scaling_invariance():
    s, g, p, law = make_solver()
    st = smooth_state(g, 0.02)
    assert scaling_invariance_probe(st, 1.0, p, law, 0.1, 0.02) == 0.0
    assert scaling_invariance_probe(st, 2.0, p, law, 0.1, 0.02) < 1e-4
    assert scaling_invariance_probe(st, 1.5, p, law, 0.16, 0.02) < 1e-4
    assert scaling_invariance_probe(st, 1.5, p, law, 0.16, 0.02, nonlinear=False) < 1e-8


def test_picard_zero_data_and_contraction():
    _, g, p, law = make_solver(n=32)
    zero = FluidState.from_physical(g, np.zeros(g.shape), np.zeros((2,) + g.shape))
    res = picard_solve(zero, 0.5, 3, p, law, steps=8)
    assert all(d == 0 for d in res.deltas)
    res = picard_solve(smooth_state(g, 1e-3), 1.0, 6, p, law, steps=32)
    assert all(r < 0.5 for r in res.ratios)
    assert res.ratios[0] > res.ratios[1] * 0.5  # no growth before roundoff takes over


def test_picard_divergence_is_reported(monkeypatch):
    """Three consecutive ratios >= 1 abort; large data trips the vacuum guard before that."""
    import nsk.nsk_solver as mod

    _, g, p, law = make_solver(n=16)
    growth = iter(2.0**k for k in range(100))
    monkeypatch.setattr(mod, "_cl_norm", lambda *args: next(growth))
    with pytest.raises(PicardDivergence) as info:
        picard_solve(smooth_state(g, 1e-3), 0.5, 10, p, law, steps=4)
    assert info.value.ratios == [2.0, 2.0, 2.0]
    monkeypatch.undo()
    with pytest.raises(VacuumError):
        picard_solve(smooth_state(g, 0.9), 20.0, 12, p, law, steps=16)


def test_checkpoint_round_trip(tmp_path):
    s, g, p, law = make_solver()
    st, traj = s.run(smooth_state(g, 0.05), 0.2, 0.05)
    save_checkpoint(tmp_path / "c.npz", st, p, law)
    back, p2, law2 = load_checkpoint(tmp_path / "c.npz")
    assert p2 == p and back.time == st.time and law2.describe() == law.describe()
    assert np.array_equal(back.a.coefficients, st.a.coefficients)
    assert np.array_equal(back.m.coefficients, st.m.coefficients)
    write_diagnostics_csv(traj, tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "t,mass,l2_a,l2_m,min_rho" and len(lines) == len(traj) + 1


def test_trajectory_pair_trace_matches_direct_norms():
    from nsk.littlewood_paley import DyadicFilterBank

    s, g, p, _ = make_solver()
    st = smooth_state(g, 0.05)
    _, traj = s.run(st, 0.1, 0.05)
    bank = DyadicFilterBank(g)
    final = s.run(st, 0.1, 0.05, trajectory=False)[0]
    wa = (p.gamma + g.kmag) * final.a.coefficients
    direct = bank.shell_norms(np.concatenate([wa, final.m.coefficients]))
    assert np.allclose(traj.pair_trace("gamma").norms[-1], direct, rtol=1e-10, atol=1e-14)
