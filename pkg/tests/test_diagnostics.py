import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import special

from modfree.diagnostics import (DiagnosticsRecord, PairKernel, circular_w1, close_pair_energy,
                                 convexity_bound, euler_lagrange_fixed_point, fourier_lemma_check,
                                 large_deviation_functional, large_deviation_z, log_gibbs,
                                 master_inequality_check, master_records, modulated_energy,
                                 modulated_energy_state, signed_measure_energy, sliced_w1,
                                 smoothed_kernel, summarize, truncated_energy, truncated_kernel,
                                 truncation_profile, wasserstein1, zero_pair_kernel)
from modfree.diagnostics.energy import modulated_energy_config
from modfree.diagnostics.gibbs import MeanFieldPotential
from modfree.kernels import kernel_from_label, zero_kernel
from modfree.liouville import make_liouville_state, product_state

M = 64
X = np.arange(M) / M
COS = 1 + 0.5 * np.cos(2 * np.pi * X)


@pytest.fixture(scope="module")
def cos_kernel():
    return kernel_from_label("cosine-test", M)


def test_antipodal_pair_weights(cos_kernel):
    x = np.array([[0.0], [0.5]])
    g = log_gibbs(x, cos_kernel, np.ones(M), 1.0)
    assert g.logGN == pytest.approx(0.5, abs=1e-14)
    assert g.logGbar == pytest.approx(0.0, abs=1e-14)
    K = modulated_energy(x[None], np.ones(M), cos_kernel, 1.0)
    assert K.mean == pytest.approx(-0.25, abs=1e-14)


def test_gibbs_rejects_bad_input(cos_kernel):
    with pytest.raises(ValueError):
        log_gibbs(np.zeros((2, 1)), cos_kernel, np.ones(M), 0.0)
    with pytest.raises(ValueError):
        log_gibbs(np.zeros((2, 1)), cos_kernel, np.zeros(M), 1.0)


@given(arrays(np.float64, 7, elements=st.floats(0, 1, exclude_max=True)))
def test_energy_matches_fourier_sum(x):
    k = kernel_from_label("cosine-test", M)
    pot = MeanFieldPotential(COS, k)
    bracket = modulated_energy_config(x[:, None], k, pot)
    spec = signed_measure_energy(k, x[:, None], np.full(7, 1 / 7), density=COS)
    # the Fourier sum keeps the diagonal V(0) / N
    assert bracket == pytest.approx(spec - 1.0 / 7, abs=1e-12)


def test_signed_energy_methods_agree():
    k = kernel_from_label("periodic-log", 32)
    pts = np.array([[0.1], [0.37], [0.8]])
    w = np.array([0.5, 0.2, 0.3])
    a = signed_measure_energy(k, pts, w, density=COS[::2], method="spectral")
    b = signed_measure_energy(k, pts, w, density=COS[::2], method="direct")
    assert a == pytest.approx(b, rel=1e-10)


def test_product_state_energy_is_self_energy(cos_kernel):
    # E[bracket] over iid rho_bar = -(1/N) int V*rho_bar rho_bar
    k = kernel_from_label("cosine-test", 32)
    rho = COS[::2]
    s = product_state(rho, 2, 0.5, k)
    assert modulated_energy_state(s, rho, k, 0.5) == pytest.approx(-0.0625 / 2, abs=1e-14)


def test_truncation_profiles():
    r = np.linspace(0, 3, 301)
    flat = truncation_profile(r)
    assert np.all(flat[r <= 1] == 1) and np.all(flat[r >= 2] == 0)
    assert np.all(np.diff(flat) <= 0)
    auto = truncation_profile(r, "autocorrelation")
    assert auto[0] == pytest.approx(1) and np.all(auto >= 0) and np.all(auto[r >= 2] == 0)
    n = 256
    rad = np.abs(np.minimum(np.arange(n), n - np.arange(n)) / n)
    coeffs = np.real(np.fft.fft(truncation_profile(rad / 0.25, "autocorrelation")))
    assert coeffs.min() > -1e-6 * coeffs.max()
    with pytest.raises(ValueError):
        truncation_profile(r, "box")


def test_truncation_inactive_at_half_period():
    k = kernel_from_label("periodic-log", 256)
    x = np.random.default_rng(3).random((4, 16, 1))
    full = modulated_energy(x, COS, k, 0.5)
    trunc = truncated_energy(x, COS, k, 0.5, eta=0.5)
    np.testing.assert_allclose(trunc.values, full.values, atol=1e-12)
    small = truncated_energy(x, COS, k, 0.5, eta=0.05)
    assert not np.allclose(small.values, full.values)


def test_close_pairs():
    k = kernel_from_label("cosine-test", M)
    x = np.array([[[0.0], [0.01], [0.5]]])
    cp = close_pair_energy(x, k, 0.02)
    assert cp.mean == pytest.approx(2 * np.cos(2 * np.pi * 0.01) / 9, rel=1e-12)
    assert close_pair_energy(x, k, 0.001).mean == 0


def test_summarize():
    e = summarize(np.arange(20.0))
    assert e.mean == 9.5 and e.ci_low < 9.5 < e.ci_high
    assert e.se == pytest.approx(np.std(np.arange(20.0), ddof=1) / np.sqrt(20))


def test_record_identity():
    DiagnosticsRecord(t=0, K_N=1.0, H_N=2.0, E_N=3.0)
    with pytest.raises(ValueError):
        DiagnosticsRecord(t=0, K_N=1.0, H_N=2.0, E_N=3.5)
    assert "W1_marginal" in DiagnosticsRecord.columns()


def test_master_balance_small():
    k = kernel_from_label("cosine-test", 32)
    rho = COS[::2]
    a = np.outer(rho, rho) * (1 + 0.3 * np.cos(2 * np.pi * (X[::2, None] - X[None, ::2])))
    series = master_inequality_check(make_liouville_state(a, 0.5, k), rho, 0.05, 1e-3, stride=10)
    fine = master_inequality_check(make_liouville_state(a, 0.5, k), rho, 0.05, 5e-4, stride=20)
    # the residual is the trapezoidal time-integration error
    assert series.tol < 1e-4
    assert series.tol / fine.tol == pytest.approx(4, rel=0.05)
    assert np.all(series.D >= 0)
    recs = master_records(series)
    assert len(recs) == len(series.t) == 6
    zero = master_inequality_check(product_state(rho, 2, 0.5, zero_kernel(32)), rho, 0.02, 1e-3)
    assert zero.tol < 1e-15


def test_smoothed_kernel_nonnegative_modes():
    sm = smoothed_kernel(kernel_from_label("periodic-log", 256), 1 / 16)
    c = sm.coefficients(sm.n)
    assert np.all(c >= 0)


def test_fourier_trials_nest():
    k = kernel_from_label("periodic-log", 256)
    psi = lambda x: np.sin(2 * np.pi * x)
    a = fourier_lemma_check(k, psi, trials=10, seed=4)
    b = fourier_lemma_check(k, psi, trials=20, seed=4)
    np.testing.assert_array_equal(b.ratios[:10], a.ratios)
    assert np.isfinite(b.max_ratio) and b.max_ratio >= a.max_ratio
    z = fourier_lemma_check(zero_kernel(64), psi, trials=5)
    assert z.skipped == 5 and z.max_ratio == 0.0


def test_convexity_cases():
    const = convexity_bound(lambda x: np.full(len(x), 0.3), COS[::4], 1.0, 2, quadrature=True)
    assert const.slack == pytest.approx(0, abs=1e-12)
    psi = lambda x: 0.1 * np.cos(2 * np.pi * x).mean(axis=1)
    mc = convexity_bound(psi, COS[::4], 1.0, 2, samples=4000)
    assert mc.reliable and mc.slack > 0
    q = convexity_bound(psi, COS[::4], 1.0, 2, quadrature=True)
    assert q.slack > 0


def cos_pair(a, n=64):
    c = np.zeros(n)
    c[1] = c[-1] = a
    return PairKernel(c)


def test_two_particle_z_oracle():
    a = 0.5
    z = large_deviation_z(cos_pair(a), np.ones(64), 2, samples=20000, seed=1)
    oracle = 0.5 * np.log(special.i0(2 * a))
    assert z.ci_low - 0.005 <= oracle <= z.ci_high + 0.005
    assert z.value == pytest.approx(oracle, abs=0.01)
    assert large_deviation_z(zero_pair_kernel(), np.ones(64), 5).value == 0


def test_truncated_pair_kernel():
    k = kernel_from_label("periodic-log", 256)
    W = truncated_kernel(k, 1 / 8, l1=0.05, n=64)
    assert W.l1_norm() == pytest.approx(0.05)
    assert W.values.min() >= -1e-12
    assert np.all(np.real(W.coeffs) >= -1e-12 * W.at_zero)


def test_fixed_point():
    W = cos_pair(0.1)
    r = euler_lagrange_fixed_point(W, np.ones(64))
    assert r.residual <= 1e-12 and np.max(np.abs(r.u)) < 1e-14
    u0 = 0.1 * np.cos(2 * np.pi * X)
    r = euler_lagrange_fixed_point(W, COS, u0=u0)
    assert r.residual <= 1e-12
    assert r.mu_bar.mean() == pytest.approx(1.0)
    assert large_deviation_functional(W, COS / COS.mean(), r.mu_bar) >= r.functional - 1e-12
    z = euler_lagrange_fixed_point(zero_pair_kernel(), COS)
    assert z.iterations == 1 and z.functional == 0


def test_w1_oracles():
    assert circular_w1(np.ones(M), COS) == pytest.approx(1 / (2 * np.pi ** 2), abs=1e-9)
    a = np.array([[0.1]])
    b = np.array([[0.8]])
    assert circular_w1(a, b) == pytest.approx(0.3, abs=1e-4)
    with pytest.raises(ValueError):
        circular_w1(np.ones(M), 2 * COS)


pts = arrays(np.float64, (6, 1), elements=st.floats(0, 1, exclude_max=True))


@given(pts, pts, pts)
def test_w1_metric(a, b, c):
    ab, ba = circular_w1(a, b), circular_w1(b, a)
    assert ab == pytest.approx(ba, abs=1e-12)
    assert circular_w1(a, a) == 0
    assert ab <= circular_w1(a, c) + circular_w1(c, b) + 1e-4
    assert 0 <= ab <= 0.5 + 1e-4


def test_sliced_w1():
    n = 32
    x = np.arange(n) / n
    rho = 1 + 0.5 * np.cos(2 * np.pi * x)[:, None] * np.ones(n)
    assert sliced_w1(rho, rho) == pytest.approx(0, abs=1e-12)
    d = sliced_w1(rho, np.ones((n, n)))
    assert 0 < d < 1 / (2 * np.pi ** 2)
    p = np.random.default_rng(0).random((50, 2))
    assert wasserstein1(p, p, dim=2) == pytest.approx(0, abs=1e-12)
    assert wasserstein1(p, np.ones((n, n)), dim=2) > 0


def test_iid_energy_matches_self_energy_oracle():
    from modfree.particles import SimConfig, init_ensemble
    from modfree.profiles import density_profile
    k = kernel_from_label("periodic-log", 256)
    rho = density_profile("vonmises:2", 256)
    N, sigma = 16, 0.5
    pos = init_ensemble(SimConfig(N=N, kernel=k, sigma=sigma, dt=1e-3, T=1e-3, R=400, seed=5,
                                  init=rho)).positions
    est = modulated_energy(pos, rho, k, sigma)
    j = np.arange(1, 200)
    rho_hat = special.iv(j, 2.0) / special.i0(2.0)
    oracle = -2 * np.sum(rho_hat ** 2 / (2 * j)) / (2 * sigma * N)
    assert abs(est.mean - oracle) <= 4 * est.se
