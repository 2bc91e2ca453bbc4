import numpy as np
import pytest

from nsk.littlewood_paley import (
    DyadicFilterBank,
    ShellTrace,
    besov_norm,
    bony_decompose,
    build_filters,
    chemin_lerner_norm,
    dealiased_product,
    lp_block,
    product_inequality_probe,
    random_band_field,
    split_low_high,
)
from nsk.spectral_core import SpectralField, forward, fractional_laplacian, inverse, l2_norm, make_grid


@pytest.fixture
def bank(grid2):
    return build_filters(grid2)


def single_mode(grid, kx):
    """cos(kx x) built exactly on the lattice (kx an integer, box 2 pi)."""
    c = np.zeros((1,) + grid.shape, dtype=complex)
    c[(0, kx) + (0,) * (grid.dim - 1)] = c[(0, -kx) + (0,) * (grid.dim - 1)] = 1.0
    return SpectralField(grid, c)


def test_filter_range_covers_band():
    b = build_filters(make_grid(1, 64, 2 * np.pi))
    assert b.j_min <= 0 and b.j_max >= 5


@pytest.mark.parametrize("dim,n,L", [(1, 128, 2 * np.pi), (2, 64, 7.3), (3, 16, 100.0)])
def test_partition_of_unity(dim, n, L):
    g = make_grid(dim, n, L)
    b = build_filters(g)
    total = sum(b.weight(j) for j in b.j_range)
    assert np.abs(total[g.kmag > 0] - 1).max() < 1e-12


def test_support(bank, grid2):
    k = grid2.kmag
    for j in bank.j_range:
        w = bank.weight(int(j))
        outside = (k < 2.0 ** (j - 1)) | (k > 2.0 ** (j + 1))
        assert np.all(w[outside] == 0)


def test_weight_vanishes_at_three_times_centre():
    g = make_grid(1, 256, 2 * np.pi)
    b = build_filters(g)
    k = g.kmag
    assert b.weight(2)[np.isclose(k, 12.0)].max() == 0.0


def test_adjacency(bank, grid2, rng):
    u = random_band_field(grid2, rng, bank)
    for j in bank.j_range:
        for k in bank.j_range:
            if abs(j - k) >= 3:
                assert np.abs(lp_block(lp_block(u, int(j), bank), int(k), bank).coefficients).max() == 0


def test_blocks_sum_to_mean_free_field(bank, grid2, rng):
    f = rng.standard_normal(grid2.shape) + 2.0
    u = forward(f, grid2)
    total = sum(lp_block(u, int(j), bank).coefficients for j in bank.j_range)
    assert np.allclose(inverse(SpectralField(grid2, total))[0], f - f.mean(), atol=1e-11)


def test_block_of_centred_mode_is_identity(bank, grid2):
    u = single_mode(grid2, 4)  # |xi| = 4 = 2^2 is a shell centre
    assert np.allclose(lp_block(u, 2, bank).coefficients, u.coefficients, atol=1e-14)
    assert np.abs(lp_block(u, 3, bank).coefficients).max() == 0


def test_block_index_out_of_range(bank, grid2):
    with pytest.raises(IndexError):
        lp_block(single_mode(grid2, 1), bank.j_max + 5, bank)


def test_besov_of_zero_and_single_mode(bank, grid2):
    assert besov_norm(SpectralField.zeros(grid2), 1.0, 1, bank).value == 0
    u = single_mode(grid2, 4)
    rep = besov_norm(u, 0.5, 1, bank)
    assert rep.value == pytest.approx(2 ** (2 * 0.5) * l2_norm(u), rel=1e-12)
    assert rep.value == pytest.approx(sum(v for _, v in rep.per_shell))


def test_besov_monotone_and_bernstein(bank, grid2, rng):
    for _ in range(5):
        u = random_band_field(grid2, rng, bank)
        assert besov_norm(u, 0.3, np.inf, bank).value <= besov_norm(u, 0.3, 1, bank).value
        lhs = besov_norm(fractional_laplacian(u, 1.0), 0.2, 1, bank).value
        rhs = besov_norm(u, 1.2, 1, bank).value
        assert 0.5 <= lhs / rhs <= 2


def test_almost_orthogonality(bank, grid2, rng):
    for _ in range(10):
        u = random_band_field(grid2, rng, bank)
        total = l2_norm(u) ** 2
        shells = sum(l2_norm(lp_block(u, int(j), bank)) ** 2 for j in bank.j_range)
        assert total / 3 <= shells <= 3 * total


def test_shell_bernstein(bank, grid2, rng):
    u = random_band_field(grid2, rng, bank)
    for j in bank.j_range:
        b = lp_block(u, int(j), bank)
        n0 = l2_norm(b)
        if n0 == 0:
            continue
        n1 = l2_norm(fractional_laplacian(b, 1.5))
        assert 2 ** ((j - 1) * 1.5) * (1 - 1e-12) <= n1 / n0 <= 2 ** ((j + 1) * 1.5) * (1 + 1e-12)


def test_low_high_split(bank, grid2, rng):
    lo_mode = single_mode(grid2, 1)
    assert split_low_high(lo_mode, 0, 0, 3, bank)[1] == 0
    hi_mode = single_mode(grid2, 8)
    assert split_low_high(hi_mode, 0, 0, 1, bank)[0] == 0
    u = random_band_field(grid2, rng, bank)
    low, high = split_low_high(u, 0.5, 0.5, 2, bank)
    assert low + high >= besov_norm(u, 0.5, 1, bank).value


def test_chemin_lerner_constant_series(bank, grid2, rng):
    u = random_band_field(grid2, rng, bank)
    times = np.linspace(0, 1, 11)
    for rho in (1, 2, np.inf):
        v = chemin_lerner_norm([u] * len(times), rho, 0.5, times=times, bank=bank)
        assert v == pytest.approx(besov_norm(u, 0.5, 1, bank).value, rel=1e-12)


def test_chemin_lerner_dominates_pointwise_linf(bank, grid2, rng):
    times = np.linspace(0, 2, 9)
    fields = [random_band_field(grid2, rng, bank) for _ in times]
    cl = chemin_lerner_norm(fields, np.inf, 0.0, times=times, bank=bank)
    assert all(cl >= besov_norm(f, 0.0, np.inf, bank).value for f in fields)


def test_chemin_lerner_single_shell():
    times = np.linspace(0, 2, 201)
    trace = ShellTrace(times, np.array([0, 1, 2]), np.stack([0 * times, np.exp(-times), 0 * times], axis=1))
    exact = np.sqrt((1 - np.exp(-4)) / 2)
    assert chemin_lerner_norm(trace, 2, 0.0) == pytest.approx(exact, rel=1e-4)
    with pytest.raises(ValueError):
        chemin_lerner_norm([], 1, 0.0, times=[])


def test_bony_reconstruction(rng):
    for dim, n in [(1, 256), (2, 64)]:
        g = make_grid(dim, n, 2 * np.pi)
        b = DyadicFilterBank(g)
        for _ in range(20):
            u, v = random_band_field(g, rng, b), random_band_field(g, rng, b)
            parts = bony_decompose(u, v, b)
            prod = dealiased_product(u, v).coefficients
            rec = sum(p.coefficients for p in parts)
            assert np.abs(rec - prod).max() <= 1e-10 * np.abs(prod).max()


def test_bony_with_constant_factor(grid2, rng, bank):
    u = random_band_field(grid2, rng, bank)
    v = forward(np.full(grid2.shape, 2.5), grid2)
    rec = sum(p.coefficients for p in bony_decompose(u, v, bank))
    assert np.allclose(rec, 2.5 * u.coefficients * grid2.dealias_mask(), atol=1e-12)


def test_product_probe_stable_under_refinement():
    coarse = product_inequality_probe(0.5, 0.5, 30, make_grid(2, 32, 2 * np.pi))
    fine = product_inequality_probe(0.5, 0.5, 30, make_grid(2, 64, 2 * np.pi))
    assert np.isfinite(coarse) and coarse > 0
    assert 0.5 < fine / coarse < 2


def test_limiting_product_probe():
    coarse = product_inequality_probe(0.5, -0.5, 30, make_grid(2, 32, 2 * np.pi), limiting=True)
    fine = product_inequality_probe(0.5, -0.5, 30, make_grid(2, 64, 2 * np.pi), limiting=True)
    assert 0.5 < fine / coarse < 2


def test_product_probe_index_checks(grid2):
    with pytest.raises(ValueError):
        product_inequality_probe(2.0, 0.5, 1, grid2)
    with pytest.raises(ValueError):
        product_inequality_probe(0.5, -0.5, 1, grid2)
