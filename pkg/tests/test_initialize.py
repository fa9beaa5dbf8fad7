import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from changesurface.errors import DegenerateData, EmptyRegime
from changesurface.grid import GridDataset
from changesurface.initialize import (InitConfig, empirical_spectrum, fit_gmm1d, init_sm, init_weights,
                                      initialize, line_spectrum)
from changesurface.kernels import Rbf, eval_dense
from changesurface.warp import ChangeSurface, PolyWeight, ZeroWeight, warp

FAST = dict(g=2, h=2, partial_iters=3, final_iters=5)


def planar_change(n=20, seed=0):
    """Rough regime for x0 + x1 < 1, smooth regime beyond; returns (data, truth)."""
    rng = np.random.default_rng(seed)
    ax = np.linspace(0, 1, n)
    pts = np.stack(np.meshgrid(ax, ax, indexing="ij"), -1).reshape(-1, 2)
    rough = rng.multivariate_normal(np.zeros(n * n), eval_dense(Rbf([0.04, 0.04], 1.0), pts, pts)
                                    + 1e-8 * np.eye(n * n))
    smooth = rng.multivariate_normal(np.zeros(n * n), eval_dense(Rbf([0.5, 0.5], 0.2), pts, pts)
                                     + 1e-8 * np.eye(n * n))
    truth = pts.sum(axis=1) < 1.0
    y = np.where(truth, rough, smooth) + 0.02 * rng.normal(size=n * n)
    return GridDataset([ax, ax], y), truth


def test_gmm_q1_closed_form(rng):
    x = rng.normal(3, 2, 500)
    g = fit_gmm1d(x, 1)
    assert g.means[0] == pytest.approx(x.mean()) and g.stds[0] == pytest.approx(x.std())


def test_gmm_separated_clusters(rng):
    x = np.concatenate([rng.normal(-5, 1, 400), rng.normal(5, 1, 600)])
    g = fit_gmm1d(x, 2, seed=1)
    np.testing.assert_allclose(np.sort(g.means), [-5, 5], atol=1.0)
    np.testing.assert_allclose(g.weights.sum(), 1.0)
    assert np.all(np.diff(g.trace) >= -1e-9 * np.abs(np.asarray(g.trace[1:])))


@given(st.integers(0, 2**31), st.integers(2, 4))
def test_gmm_monotone(seed, Q):
    rng = np.random.default_rng(seed)
    x = np.concatenate([rng.normal(m, s, 80) for m, s in zip(rng.uniform(-5, 5, 3), rng.uniform(.2, 2, 3))])
    g = fit_gmm1d(x, Q, seed)
    tr = np.asarray(g.trace)
    assert np.all(np.diff(tr) >= -1e-8 * np.abs(tr[1:]))
    assert np.all(g.stds > 0) and g.weights.sum() == pytest.approx(1.0)


def test_gmm_needs_distinct_samples():
    with pytest.raises(DegenerateData):
        fit_gmm1d(np.ones(10), 2)


def test_gmm_collapse_is_reseeded():
    x = np.concatenate([np.zeros(30), np.linspace(-3, 3, 50)])
    g = fit_gmm1d(x, 3, seed=0, max_reseeds=2)
    assert np.all(np.isfinite(g.stds)) and np.all(g.stds > 0)
    assert g.reseeds >= 1


def test_line_spectrum_sinusoid():
    spacing, f = 0.05, 3.0
    t = np.arange(64) * spacing
    freqs, p = line_spectrum(np.cos(2 * np.pi * f * t), spacing)
    assert abs(freqs[np.argmax(p)] - f) <= freqs[1] / 2 + 1e-12
    freqs, p = line_spectrum(np.full(16, 2.0), 1.0)
    assert p[0] == pytest.approx(1.0) and p[1:].sum() == pytest.approx(0.0)


def test_empirical_spectrum_mask():
    data = GridDataset([np.arange(8.0), np.arange(5.0)], np.random.default_rng(0).normal(size=40))
    with pytest.raises(EmptyRegime):
        empirical_spectrum(data, np.zeros(40, bool), 0)
    s = empirical_spectrum(data, np.ones(40, bool), 1, seed=3)
    assert s.size == 8 * 5 and np.all(s >= 0) and np.all(s <= 0.5 + 0.5 / 5)


def test_init_sm_identities():
    ax = np.linspace(0, 1, 32)
    f = 6.0
    y = np.cos(2 * np.pi * f * ax)[:, None] * np.ones((1, 4))
    data = GridDataset([ax, np.arange(4.0)], y.ravel() + 0.01 * np.random.default_rng(1).normal(size=128))
    surface = ChangeSurface((ZeroWeight(2),))
    kernels, det = init_sm(data, surface, Q=2, seed=0)
    g0, g1 = det[0]["gmm"]
    std_y = np.std(data.y)
    np.testing.assert_allclose(kernels[0].weights[0], std_y * g0.weights, rtol=1e-15)
    np.testing.assert_allclose(kernels[0].weights[1], g1.weights, rtol=1e-15)
    np.testing.assert_allclose(kernels[0].weights[0].sum(), std_y)
    np.testing.assert_array_equal(kernels[0].means[0], g0.means)
    np.testing.assert_array_equal(kernels[0].variances[0], g0.stds)
    bin_width = 1 / (32 * (ax[1] - ax[0]))
    assert np.min(np.abs(kernels[0].means[0] - f)) <= bin_width
    k2, det2 = init_sm(data, surface, Q=2, seed=0, v_as_variance=True)
    np.testing.assert_allclose(k2[0].variances[0], det2[0]["gmm"][0].stds ** 2)


def test_init_sm_white_noise_and_fallback(rng):
    data = GridDataset([np.arange(16.0), np.arange(6.0)], rng.normal(size=96))
    kernels, _ = init_sm(data, ChangeSurface((ZeroWeight(2),)), Q=1, seed=0)
    k = kernels[0]
    assert np.all(np.isfinite(k.means)) and np.all(k.variances > 0)
    assert 0.1 < k.means[0, 0] < 0.4
    # regime 1 never dominates: its spectrum falls back to the full data
    surface = ChangeSurface((PolyWeight(50.0, np.zeros((0, 2))), ZeroWeight(2)))
    _, det = init_sm(data, surface, Q=2, seed=0)
    assert det[1]["fallback"] == [True, True] and det[0]["fallback"] == [False, False]


def test_init_weights_minimal(rng):
    data = GridDataset([np.linspace(0, 1, 6), np.linspace(0, 1, 5)], rng.normal(size=30))
    wi = init_weights(data, InitConfig(g=1, h=1, partial_iters=1, final_iters=1))
    assert np.isfinite(wi.final_objective)
    np.testing.assert_allclose(wi.defaults["Lambda"], [0.25, 0.25])
    assert wi.defaults["sigma0"] == pytest.approx(np.std(data.y))
    with pytest.raises(DegenerateData):
        init_weights(data.with_y(np.ones(30)), InitConfig(**FAST))


def test_init_weights_selection_and_determinism():
    data, _ = planar_change(10)
    cfg = InitConfig(g=3, h=3, partial_iters=5, final_iters=10, seed=4)
    a, b = init_weights(data, cfg), init_weights(data, cfg)
    assert a.final_objective <= a.partial_objectives.min() + 1e-9
    assert a.final_objective <= a.draw_objectives.min() + 1e-9
    assert a.winner == int(np.argmin(a.partial_objectives))
    np.testing.assert_array_equal(a.model.pack(), b.model.pack())


def test_init_weights_planar_change():
    data, truth = planar_change(20)
    wi = init_weights(data, InitConfig(g=5, h=5, partial_iters=20, final_iters=60, seed=0))
    s = warp(wi.model.surface, data.points())[:, 0] > 0.5
    agree = np.mean(s == truth)
    assert max(agree, 1 - agree) >= 0.8


def test_initialize_pipeline(rng):
    data = GridDataset([np.linspace(0, 1, 8), np.linspace(0, 2, 6)], rng.normal(size=48))
    res = initialize(data, 2, InitConfig(Q=2, seed=5, **FAST))
    assert res.model.r == 2 and res.model.kernels[0].n_components == 2
    again = initialize(data, 2, InitConfig(Q=2, seed=5, **FAST))
    np.testing.assert_array_equal(res.model.pack(), again.model.pack())
    assert "winner" in res.report()
    one = initialize(data, 1, InitConfig(Q=2, seed=5, **FAST))
    assert one.model.r == 1 and one.weights is None
