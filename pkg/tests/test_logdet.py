import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from changesurface.errors import DimensionMismatch, NonPositive, NotPSD, SizeCap
from changesurface.kron import EigenSpectrum, kron_eigvals, scaled_term_spectrum
from changesurface.logdet import (EXACT, MIDDLE, BenchmarkConfig, WeylStrategy, benchmark_bounds,
                                  exact_logdet_dense, fiedler_logdet, weyl_logdet, weyl_pairwise)


def brute_pairs(a, b):
    """Exhaustive Weyl oracle: min over i + j = k of a_i + b_j."""
    n = len(a)
    return np.array([min(a[i] + b[k - i] for i in range(k + 1)) for k in range(n)])


def desc(rng, n, scale=1.0):
    return np.sort(rng.exponential(scale, n))[::-1]


def test_strategy_parse():
    assert WeylStrategy.parse("greedy:40") == WeylStrategy("greedy", 40)
    assert WeylStrategy.parse("Middle") == MIDDLE
    assert str(WeylStrategy.parse("greedy:7")) == "greedy:7"
    with pytest.raises(ValueError):
        WeylStrategy.parse("fastest")
    with pytest.raises(ValueError):
        WeylStrategy("greedy", 0)


def test_middle_hand_example():
    a, b = np.array([2.0, 1.0]), np.array([4.0, 3.0])
    np.testing.assert_array_equal(weyl_pairwise(a, b, MIDDLE).values, [6, 5])
    true = np.sort(np.linalg.eigvalsh(np.diag(a) + np.diag(b)))[::-1]
    assert np.all(weyl_pairwise(a, b, MIDDLE).values >= true)


def test_middle_convention():
    # output index 2 (1-based) uses i = j + 1: alpha_2 + beta_1
    a, b = np.array([10.0, 0.0]), np.array([5.0, 4.0])
    assert weyl_pairwise(a, b, MIDDLE).values[1] == 5.0


def test_zero_partner_is_exact(rng):
    a = desc(rng, 9)
    for strat in (EXACT, WeylStrategy("greedy", 2)):
        np.testing.assert_allclose(weyl_pairwise(a, np.zeros(9), strat).values, a)
    # the fixed middle pairing cannot pick i = k, so it is only an upper bound here
    assert np.all(weyl_pairwise(a, np.zeros(9), MIDDLE).values >= a)


@given(st.integers(0, 2**31), st.integers(1, 50))
def test_greedy_half_width_equals_exact(seed, n):
    rng = np.random.default_rng(seed)
    a, b = desc(rng, n), desc(rng, n, 3.0)
    want = np.sort(brute_pairs(a, b))[::-1]
    np.testing.assert_allclose(weyl_pairwise(a, b, EXACT).values, want)
    np.testing.assert_allclose(weyl_pairwise(a, b, WeylStrategy("greedy", max(1, n // 2))).values, want)


def test_pairwise_length_mismatch():
    with pytest.raises(DimensionMismatch):
        weyl_pairwise(np.ones(3), np.ones(4))


def test_single_spectrum_exact(rng):
    a = desc(rng, 12)
    assert weyl_logdet([a], 0.1) == pytest.approx(np.sum(np.log(a + 0.1)))


def test_nonpositive():
    with pytest.raises(NonPositive):
        weyl_logdet([np.array([1.0, 0.0])], 0.0)
    with pytest.raises(NonPositive):
        weyl_logdet([np.array([1.0, -1.0])], 1.0)


def random_psd(rng, n, rank=None):
    x = rng.normal(size=(n, rank or n))
    return x @ x.T / n


def spec(m):
    return EigenSpectrum.from_unsorted(np.clip(np.linalg.eigvalsh(m), 0, None))


def test_three_terms_all_strategies(rng):
    mats = [random_psd(rng, 20, 5) for _ in range(3)]
    exact = exact_logdet_dense(mats, 0.01)
    for strat in (EXACT, MIDDLE, WeylStrategy("greedy", 3)):
        assert weyl_logdet([spec(m) for m in mats], 0.01, strat) >= exact - 1e-9


def test_fiedler_examples(rng):
    a, b = np.array([2.0, 1.0]), np.array([4.0, 3.0])
    assert fiedler_logdet(a, b) == pytest.approx(np.log(25))
    assert np.log(24) <= fiedler_logdet(a, b)
    c = desc(rng, 6)
    assert fiedler_logdet(c, np.zeros(6), 0.5) == pytest.approx(np.sum(np.log(c + 0.5)))
    assert fiedler_logdet(c, c) == pytest.approx(np.sum(np.log(c + c[::-1])))
    with pytest.raises(TypeError):
        fiedler_logdet(c, c, c, 0.0)


def test_exact_dense_examples(rng):
    assert exact_logdet_dense([np.eye(3), np.eye(3)]) == pytest.approx(3 * np.log(2))
    assert exact_logdet_dense([np.zeros((4, 4))], 0.3) == pytest.approx(4 * np.log(0.3))
    a, b = random_psd(rng, 10), random_psd(rng, 10)
    want = np.sum(np.log(np.linalg.eigvalsh(a + b)))
    assert exact_logdet_dense([a, b]) == pytest.approx(want, abs=1e-10)
    with pytest.raises(NotPSD):
        exact_logdet_dense([-np.eye(3)])
    with pytest.raises(SizeCap):
        exact_logdet_dense([np.eye(5)], cap=4)


def test_commuting_diagonal_exact():
    # aligned diagonal matrices: the exact pairing k = i + j (i = 0 or j = 0 side) is tight
    a = np.array([5.0, 3.0, 1.0, 0.5])
    b = np.array([4.0, 2.0, 0.7, 0.1])
    exact = np.sum(np.log(a + b + 0.01))
    assert weyl_logdet([a, b], 0.01, EXACT) >= exact - 1e-12
    assert weyl_logdet([a, np.zeros(4)], 0.01, EXACT) == pytest.approx(np.sum(np.log(a + 0.01)))


@given(st.integers(0, 2**31), st.sampled_from([2, 3]), st.sampled_from([(3, 3), (4, 5), (2, 3, 2)]))
def test_bound_chain(seed, r, shape):
    rng = np.random.default_rng(seed)
    n = int(np.prod(shape))
    noise = 1e-2
    facs = [[random_psd(rng, k) + 1e-3 * np.eye(k) for k in shape] for _ in range(r)]
    scales = [rng.uniform(0.01, 1, n) for _ in range(r)]
    mats = []
    for fs, s in zip(facs, scales):
        K = np.ones((1, 1))
        for f in fs:
            K = np.kron(K, f)
        mats.append(s[:, None] * K * s[None, :])
    spectra = [scaled_term_spectrum(s, kron_eigvals(fs)) for fs, s in zip(facs, scales)]
    exact = exact_logdet_dense(mats, noise)
    ew = weyl_logdet(spectra, noise, EXACT)
    gr = weyl_logdet(spectra, noise, WeylStrategy("greedy", 2))
    mid = weyl_logdet(spectra, noise, MIDDLE)
    slack = 1e-8 * max(1.0, abs(exact))
    assert exact <= ew + slack and ew <= gr + slack and gr <= mid + slack
    if r == 2:
        assert fiedler_logdet(*spectra, noise) >= exact - slack


def test_benchmark_rows():
    rows = benchmark_bounds(BenchmarkConfig(sizes=(64, 128), repeats=1))
    strategies = {(r.kernels, r.strategy) for r in rows}
    assert (2, "fiedler") in strategies and (3, "fiedler") not in strategies
    assert (2, "greedy:40") in strategies
    assert all(np.isfinite(r.ratio) for r in rows)
    for r in rows:
        if r.strategy != "dense":
            # bounds sit above the exact value
            assert r.logdet_value >= r.exact_value - 1e-8 * abs(r.exact_value)
