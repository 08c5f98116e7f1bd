import numpy as np
import pytest
from scipy import stats

from modfree import rng
from modfree.kernels import kernel_from_label, zero_kernel
from modfree.particles import (SimConfig, blowup_monitor, init_ensemble, pair_forces, run,
                               sample_density, step, step_replica, suggest_dt)


def config(**kw):
    base = dict(N=8, kernel=zero_kernel(64), sigma=0.0, dt=1e-3, T=1e-2, R=2, seed=5)
    base.update(kw)
    return SimConfig(**base)


def test_streams_are_addressed_not_sequential():
    a = rng.stream(3, 1, 7).standard_normal(4)
    rng.stream(3, 0, 0).standard_normal(100)
    np.testing.assert_array_equal(rng.stream(3, 1, 7).standard_normal(4), a)
    assert not np.array_equal(rng.stream(3, 1, 8).standard_normal(4), a)
    assert not np.array_equal(rng.stream(3, 1, 7, rng.PURPOSE_INIT).standard_normal(4), a)


def test_config_validation():
    with pytest.raises(ValueError):
        config(N=1)
    with pytest.raises(ValueError):
        config(R=0)
    with pytest.raises(ValueError):
        config(dt=0.1, T=0.01)
    with pytest.raises(ValueError):
        config(sigma_mode="vanishing")
    with pytest.raises(ValueError):
        config(d=2)
    c = config(sigma=0.5, beta=0.5, sigma_mode="vanishing", N=16)
    assert c.sigma_N == pytest.approx(0.125)


def test_lattice_init():
    st = init_ensemble(config(N=4, R=1, init="lattice"))
    np.testing.assert_array_equal(st.positions[0, :, 0], [0, 0.25, 0.5, 0.75])


def test_uniform_init_ks():
    st = init_ensemble(config(N=1000, R=1))
    ks = stats.kstest(st.positions[0, :, 0], "uniform").statistic
    assert ks <= 1.63 / np.sqrt(1000)


def test_nonuniform_init_ks():
    x = sample_density(1 + 0.5 * np.cos(2 * np.pi * np.arange(4096) / 4096), 4000,
                       rng.stream(0, 0, 0, rng.PURPOSE_INIT))[:, 0]
    cdf = lambda t: t + 0.5 * np.sin(2 * np.pi * t) / (2 * np.pi)
    assert stats.kstest(x, cdf).statistic <= 1.63 / np.sqrt(4000)


def test_init_deterministic_and_rejects_bad_density():
    a = init_ensemble(config(init="cosine:0.5"))
    b = init_ensemble(config(init="cosine:0.5"))
    np.testing.assert_array_equal(a.positions, b.positions)
    with pytest.raises(ValueError):
        init_ensemble(config(init=-np.ones(64)))
    with pytest.raises(ValueError):
        init_ensemble(config(init=np.zeros(64)))


def test_two_dimensional_sampling():
    x = sample_density(np.ones((32, 32)), 500, rng.stream(1, 0, 0))
    assert x.shape == (500, 2) and np.all((0 <= x) & (x < 1))


def test_zero_dynamics_fixed():
    c = config()
    s = init_ensemble(c)
    np.testing.assert_array_equal(step(s, c).positions, s.positions)


def test_symmetric_pair_is_stationary():
    k = kernel_from_label("cosine-test", 64)
    x = np.array([[0.0], [0.5]])
    new, _ = step_replica(x, k, 0.0, 1e-2, np.zeros_like(x))
    np.testing.assert_allclose(new, x, atol=1e-14)


def test_increment_variance():
    c = config(N=100, R=10, sigma=0.5, T=1e-2, dt=1e-3)
    snaps = run(c)
    pos = np.array([s.positions for s in snaps])
    inc = np.diff(pos, axis=0)
    inc = inc - np.round(inc)
    var = inc.var()
    assert inc.size == 10 ** 4
    assert var == pytest.approx(2 * 0.5 * 1e-3, rel=0.05)


def test_snapshot_count():
    assert len(run(config(T=10e-3, dt=1e-3, stride=5))) == 3


def test_repulsive_no_collision():
    c = config(N=64, R=3, sigma=0.5, kernel=kernel_from_label("periodic-log", 4096), T=0.05)
    snaps = run(c)
    assert np.all(snaps[-1].min_dist > 0)


def test_supercritical_blowup_flagged():
    k = kernel_from_label("pks:4.0", 64, dim=2)
    c = SimConfig(N=64, kernel=k, sigma=0.25, dt=1e-3, T=0.3, R=4, seed=1, d=2, stride=10,
                  allow_capped=True)
    assert blowup_monitor(run(c))["flagged"]


def test_exchangeability():
    k = kernel_from_label("periodic-log", 256)
    gen = np.random.default_rng(0)
    x = gen.random((6, 1))
    noise = gen.standard_normal((6, 1))
    perm = gen.permutation(6)
    a, _ = step_replica(x, k, 0.3, 1e-3, noise)
    b, _ = step_replica(x[perm], k, 0.3, 1e-3, noise[perm])
    np.testing.assert_array_equal(a[perm], b)


@pytest.mark.parametrize("label", ["periodic-log", "riesz:0.5", "cosine-test"])
def test_total_drift_vanishes(label):
    k = kernel_from_label(label, 256)
    x = np.random.default_rng(1).random((32, 1))
    drift, _, _ = pair_forces(x, k)
    assert abs(drift.sum()) <= 1e-10


def test_worker_count_invariance():
    c = config(N=16, R=4, sigma=0.5, kernel=kernel_from_label("periodic-log", 256),
               T=5e-3, init="cosine:0.5")
    a = run(c, workers=1)
    b = run(c, workers=2)
    for sa, sb in zip(a, b):
        np.testing.assert_array_equal(sa.positions, sb.positions)


def test_suggest_dt_positive():
    dt = suggest_dt(kernel_from_label("cosine-test", 64), 0.5)
    assert 0 < dt <= 1 / (16 * 0.5 * 64 ** 2)
