import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from modfree.kernels import kernel_from_label, zero_kernel
from modfree.liouville import (ProductGrid, ckp_check, gibbs_density, make_liouville_state,
                               marginal, product_state, relative_entropy, run_liouville)

M = 32
X = np.arange(M) / M
COS = 1 + 0.5 * np.cos(2 * np.pi * X)


def test_product_marginals():
    s = product_state(COS, 3, 0.5, zero_kernel(M))
    np.testing.assert_allclose(marginal(s, 1), COS, atol=1e-14)
    np.testing.assert_allclose(marginal(s, 2), np.outer(COS, COS), atol=1e-14)
    with pytest.raises(ValueError):
        marginal(s, 4)


def test_relative_entropy_of_product_is_one_body_kl():
    other = 1 + 0.3 * np.sin(2 * np.pi * X)
    s = product_state(other, 2, 0.5, zero_kernel(M))
    oracle = stats.entropy(other / M, COS / M)
    assert relative_entropy(s, COS) == pytest.approx(oracle, rel=1e-12)
    assert relative_entropy(product_state(COS, 2, 0.5, zero_kernel(M)), COS) == pytest.approx(0, abs=1e-15)


@given(arrays(np.float64, (8, 8), elements=st.floats(0.0, 1.0)))
def test_ckp_inequalities(raw):
    rho = raw + raw.T + 1e-3
    rho = rho / rho.mean()
    ref = 1 + 0.2 * np.cos(2 * np.pi * np.arange(8) / 8)
    r = ckp_check(rho, ref, k=1)
    assert r.pinsker_slack >= -1e-12
    assert r.subadditivity_slack >= -1e-12


def test_heat_flow_marginal():
    sigma, T = 0.1, 0.1
    s = product_state(COS, 2, sigma, zero_kernel(M))
    out = run_liouville(s, T, 1e-2)[-1]
    exact = 1 + 0.5 * np.exp(-4 * np.pi ** 2 * sigma * T) * np.cos(2 * np.pi * X)
    np.testing.assert_allclose(marginal(out, 1), exact, atol=1e-12)


def test_gibbs_is_stationary():
    k = kernel_from_label("cosine-test", 64)
    g = gibbs_density(k, 0.2, 2, 64)
    s = make_liouville_state(g, 0.2, k)
    err = [np.max(np.abs(run_liouville(s, 0.1, dt)[-1].rho - g)) for dt in (1e-3, 5e-4)]
    # what remains is the fourth-order time error
    assert err[1] < 1e-7
    assert err[0] / err[1] > 12


def test_relaxation_toward_gibbs():
    k = kernel_from_label("cosine-test", M)
    g = gibbs_density(k, 0.3, 2, M)
    states = run_liouville(product_state(COS, 2, 0.3, k), 0.3, 1e-3, stride=50)
    kl = [float(np.mean(s.rho * np.log(s.rho / g))) for s in states]
    assert np.all(np.diff(kl) < 0)


def test_exchange_symmetry_preserved():
    k = kernel_from_label("cosine-test", M)
    a = np.outer(COS, 1 + 0.2 * np.sin(2 * np.pi * X))
    s = make_liouville_state(a + a.T, 0.2, k)
    out = run_liouville(s, 0.05, 1e-3)[-1]
    np.testing.assert_allclose(out.rho, out.rho.T, atol=1e-12)
    assert out.mass() == pytest.approx(1.0, abs=1e-13)


def test_guards():
    with pytest.raises(MemoryError):
        ProductGrid(3, 128, zero_kernel(128))
    with pytest.raises(ValueError):
        product_state(COS, 2, 0.5, kernel_from_label("periodic-log", M))
    with pytest.raises(ValueError):
        make_liouville_state(-np.ones((M, M)), 0.5, zero_kernel(M))
    with pytest.raises(ValueError):
        gibbs_density(zero_kernel(M), 0.0, 2, M)
