import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from intermit import maps, spectral, tower, ulam

ALPHAS = (0.25, 0.5, 0.75)


@pytest.fixture(scope="module")
def m():
    return maps.lsv(0.5)


@pytest.fixture(scope="module")
def family(m):
    return [tower.accim_fixed_point(m, n, M=2048, tol=1e-13) for n in (4, 8, 16, 32)]


def test_return_partition_examples(m):
    rp = tower.build_return_partition(m, 50)
    assert rp.column(1) == (0.75, 1.0)
    assert rp.masses[0] == 0.25
    lo, hi = rp.column(2)
    assert lo == pytest.approx(0.64247, abs=5e-5)
    assert rp.masses[1] == pytest.approx(0.25 - oracles.left_preimage(0.5, 0.5) / 2 + 0.0, abs=1e-14)
    assert rp.masses[1] == pytest.approx(0.10753, abs=5e-5)
    assert rp.masses.sum() + rp.tail == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        tower.build_return_partition(m, 1)
    with pytest.raises(IndexError):
        rp.column(51)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_return_time_tail(alpha):
    rp = tower.build_return_partition(maps.lsv(alpha), 4000)
    i = np.arange(1, 4001)
    sel = i >= 400
    slope = np.polyfit(np.log(i[sel]), np.log(rp.masses[sel]), 1)[0]
    assert abs(slope + 1 + 1 / alpha) < 0.1
    scaled = rp.masses[sel] * i[sel] ** (1 + 1 / alpha)
    assert scaled.max() / scaled.min() < 2
    # finite tower measure: the mean return time converges
    tail = np.cumsum(i * rp.masses)
    assert tail[-1] - tail[1999] < 0.02 * tail[-1]


def test_return_matrices_against_forward_iteration(m):
    M, n = 16, 4
    t = tower.build_truncated_tower(m, n, M)
    edges = 0.5 + np.arange(M + 1) / (2 * M)
    u = (np.arange(40000) + 0.5) / 40000
    for i, B in enumerate(t.return_matrices, start=1):
        ref = np.zeros((M, M))
        lo, hi = t.gammas[i], t.gammas[i - 1]
        for r in range(M):
            x = edges[r] + u * (edges[r + 1] - edges[r])
            x = x[(x >= lo) & (x < hi)]
            y = x.copy()
            for _ in range(i):
                y = oracles.lsv_forward(0.5, y)
            cols = np.minimum(((y - 0.5) * 2 * M).astype(int), M - 1)
            ref[r] = np.bincount(cols, minlength=M) / len(u)
        assert np.abs(B.toarray() - ref).max() < 2e-4


def test_return_matrix_support_and_covering(m):
    t = tower.build_truncated_tower(m, 12, 256)
    edges = t.edges
    for i, B in enumerate(t.return_matrices, start=1):
        rows = np.unique(B.tocoo().row)
        assert np.all(edges[rows + 1] > t.gammas[i]) and np.all(edges[rows] < t.gammas[i - 1])
    total = t.col_weights.sum(axis=0) + t.escape_weights
    np.testing.assert_allclose(total, 1.0, atol=1e-12)
    # the escape weights are exactly the share of each bin below gamma_n
    share = np.clip((t.hole_boundary - edges[:-1]) / t.bin_width, 0, 1)
    np.testing.assert_allclose(t.escape_weights, share, atol=1e-12)


def test_restrict_matches_fresh_build(m):
    big = tower.build_truncated_tower(m, 16, 128)
    a = tower.accim_fixed_point(m, 6, tower=big.restrict(6), tol=1e-13)
    b = tower.accim_fixed_point(m, 6, M=128, tol=1e-13)
    assert a.lambda_n == b.lambda_n
    with pytest.raises(ValueError):
        big.restrict(17)


def test_markov_covering_tail(m):
    for n in (8, 64, 512):
        t = tower.build_truncated_tower(m, n, 64)
        missing = (t.escape_weights * t.bin_width).sum()
        assert missing == pytest.approx(t.hole_boundary - 0.5, abs=1e-13)


def test_preconditions(m):
    with pytest.raises(ValueError):
        tower.accim_fixed_point(m, 1, M=64)
    with pytest.raises(ValueError):
        tower.build_truncated_tower(m, 4, 8)
    with pytest.raises(ValueError):
        tower.accim_fixed_point(m, 4, M=64, seed=np.ones((3, 64)))


def test_mass_accounting_and_identity(family):
    for r in family:
        assert r.converged
        assert r.diagnostics["max_accounting_error"] <= 1e-12
        assert abs((1 - r.lambda_n) - r.hole_mass) <= 1e-11
        assert r.queue.min() >= 0


def test_eigenfunction_levels(family):
    # level l holds lambda^-l times the base, restricted to tall columns
    r = family[1]
    W = r.tower.level_weights()
    for level in range(r.n):
        expect = r.queue[0] * r.lambda_n ** (-level)
        np.testing.assert_allclose(r.queue[level], expect, rtol=1e-9, atol=1e-15)
        d = r.level_density(level)
        assert np.all(np.isnan(d) == (W[level] == 0))


def test_agrees_with_interval_open_system(m):
    # the tower hole H_n corresponds on the interval to [0, T(gamma_n)) = [0, x_{n-1})
    xs = maps.preimage_sequence(m, 40).values
    for n in (4, 8, 16):
        lam = tower.accim_fixed_point(m, n, M=2048, tol=1e-13).lambda_n
        O = ulam.open_exact(m, 2048, xs[n - 1])
        assert abs(lam - spectral.substochastic_leading(O, tol=1e-13).eigenvalue) < 5e-3


def test_unique_from_several_seeds(m):
    ref = tower.accim_fixed_point(m, 8, M=256, tol=1e-13)
    rng = np.random.default_rng(3)
    for _ in range(3):
        seed = rng.random((8, 256))
        r = tower.accim_fixed_point(m, 8, M=256, tol=1e-13, seed=seed)
        assert abs(r.lambda_n - ref.lambda_n) < 1e-11
        assert np.abs(r.base_density - ref.base_density).max() < 1e-8


def test_large_n_approaches_closed_system(m):
    M = 256
    closed, tail = tower.closed_base_density(m, M=M, n_max=2000)
    assert tail < 1e-6
    errs, lams = [], []
    for n in (4, 16, 64, 256):
        r = tower.accim_fixed_point(m, n, M=M, tol=1e-13)
        base = r.base_density / (r.base_density.sum() * r.tower.bin_width)
        errs.append(np.abs(base - closed).sum() * r.tower.bin_width)
        lams.append(r.lambda_n)
    assert np.all(np.diff(errs) < 0) and errs[-1] < 1e-3
    assert np.all(np.diff(lams) > 0) and 1 - lams[-1] < 1e-4


def test_bounds_report(family):
    rep = tower.accim_bounds_check(family)
    assert 0 < rep["global_min"] < rep["global_max"] < np.inf
    assert rep["base_ratio_spread"] < 2
    lo, hi = rep["escape_ratio_range"]
    assert 0 < lo < hi and hi / lo < 2
    for row in rep["rows"]:
        assert row["escape_ratio"] > 0


def test_bounds_report_rejects_shallow():
    class Fake:
        n = 1

    with pytest.raises(ValueError):
        tower.accim_bounds_check([Fake()])


# ---------------------------------------------------------------- epsilons


def test_epsilons_definition(m):
    e = tower.epsilons(m, 1e-3)
    g = maps.gamma_sequence(m, e.n + 1)
    assert e.eps1 == pytest.approx(g[e.n - 1] - 0.5, abs=1e-16)
    assert e.eps2 == pytest.approx(g[e.n - 1] - g[e.n], abs=1e-16)
    assert e.eps1 <= 1e-3 < g[e.n - 2] - 0.5
    assert 0 < e.eps2 < e.eps1
    assert 0 < e.bound_lo < e.bound_hi < 1


@given(eps=st.floats(1e-6, 0.2))
@settings(max_examples=40)
def test_epsilons_minimality(eps):
    m = maps.lsv(0.5)
    e = tower.epsilons(m, eps)
    half = tower.epsilons(m, eps / 2)
    assert half.n >= e.n and half.eps1 <= eps / 2
    assert e.eps1 <= eps


def test_epsilons_errors(m):
    for bad in (0.0, 0.5, 0.45):
        with pytest.raises(ValueError):
            tower.epsilons(m, bad)


def test_epsilons_ratio_scaling(m):
    eps = np.logspace(-6, -4, 12)
    ratio = [tower.epsilons(m, e).bound_lo for e in eps]
    slope = np.polyfit(np.log(eps), np.log(ratio), 1)[0]
    assert abs(slope - 0.5) < 0.1
    # n ~ eps^-alpha, eps2/eps1 ~ 1/n
    k = tower.fit_constants(m, eps)
    assert 0 < k["d2"] <= k["d3"] < 2 * k["d2"]
    assert all(tower.epsilons(m, e).n <= k["d1"] * e ** -0.5 + 1e-9 for e in eps)


def test_epsilons_against_reference_row(m):
    # reference eps2/eps1 = 0.018706181316717 at N = 1000 (different map instance)
    e = tower.epsilons(m, 1 / (1000 * 2.0))
    ratio = e.bound_lo / 0.018706181316717
    assert 0.5 < ratio < 2, f"eps2/eps1 = {e.bound_lo:.6g} is {ratio:.3f} x the reference value"
