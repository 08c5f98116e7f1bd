import mpmath
import numpy as np
import pytest

from modfree.kernels import kernel_from_label
from modfree.regularizer import (annulus_masses, annulus_test, build_mollifier, build_regularized,
                                 compare_scale, mollifier_hat, select_delta_sequence)


@pytest.fixture(scope="module")
def plog():
    return kernel_from_label("periodic-log", 64)


@pytest.fixture(scope="module")
def reg_sweep(plog):
    return {eps: build_regularized(plog, eps) for eps in (0.2, 0.1, 0.05)}


def test_mollifier_properties():
    m = build_mollifier(1, 256)
    assert m.mass() == pytest.approx(1.0, abs=1e-12)
    rad = np.abs(m.coordinates()[..., 0])
    assert np.max(np.abs(m.profile[rad >= 1.0])) < 1e-14
    xi = np.linspace(0, 60, 601)
    assert mollifier_hat(xi).min() >= -1e-12
    assert mollifier_hat(np.array([0.0]))[0] == pytest.approx(1.0, abs=1e-10)


def test_mollifier_hat_matches_profile():
    m = build_mollifier(1, 256)
    x = m.coordinates()[..., 0]
    for xi in (0.5, 1.0, 2.0):
        direct = np.sum(m.profile * np.cos(2 * np.pi * xi * x)) * m.spacing
        assert mollifier_hat(np.array([xi]))[0] == pytest.approx(direct, abs=1e-6)


def test_mollifier_2d_mass():
    m = build_mollifier(2, 64)
    assert m.mass() == pytest.approx(1.0, abs=1e-12)


def test_annulus_masses_match_quadrature(plog):
    delta = 2.0 ** -5
    ball, ann = annulus_masses(plog, delta, lift=0.0)
    f = lambda x: -mpmath.log(2 * mpmath.sin(mpmath.pi * x))
    assert ball == pytest.approx(float(2 * mpmath.quad(f, [0, delta])), rel=1e-8)
    assert ann == pytest.approx(float(2 * mpmath.quad(f, [delta / 2, delta])), rel=1e-8)
    ok, _, _ = annulus_test(plog, delta, 4.0)
    assert ok


def test_compare_scale_positive(plog):
    r, h = compare_scale(plog, None, 1 / 32)
    assert r > 0 and h > 0


def test_cosine_rejected_by_gate():
    with pytest.raises(ValueError):
        select_delta_sequence(kernel_from_label("cosine-test", 64), 4.0, 0.1, 3)
    with pytest.raises(ValueError):
        build_regularized(kernel_from_label("pks:0.5", 64), 0.1)


def test_delta_sequence_rules(plog):
    seq = select_delta_sequence(plog, 4.0, 0.2, 5)
    d = seq.deltas
    assert d[0] <= 0.2 ** 2 / 4
    assert all(b < a for a, b in zip(d, d[1:]))
    for i in range(len(d) - 1):
        assert d[i + 1] <= min(seq.f_values[i], d[i] ** 2)
    assert seq.truncated and seq.notes


def test_bad_doubling_constant(plog):
    with pytest.raises(ValueError):
        select_delta_sequence(plog, 1.0, 0.1, 2)


def test_regularized_properties(reg_sweep):
    for eps, r in reg_sweep.items():
        rep = r.property_report
        assert rep["a_min_mode"] >= -1e-10
        assert r.kernel.coefficients().min() >= -1e-10
        assert rep["b_max_excess"] <= eps + rep["tol_grid"]
        assert rep["d_recursion"]
        assert r.M <= r.M_requested == int(np.ceil(1 / eps))
        # the scaling acts on the lifted (nonnegative) frame V + c
        np.testing.assert_allclose(r.V_eps.values + r.lift,
                                   (r.W_eps.values + r.lift) / (1 + 2 * r.C * eps), atol=1e-12)
    l1 = [reg_sweep[e].property_report["c_L1"] for e in (0.2, 0.1, 0.05)]
    assert l1[0] > l1[1] > l1[2]


def test_indicator_l1_scaling(reg_sweep):
    # ||1_{|x|>=delta}(V - V_eps)||_1 <= C eps / delta^k with C measured on the sweep
    for eps, r in reg_sweep.items():
        c = {d: v["L1"] * d ** r.base.meta.k / eps for d, v in r.property_report["c_sweep"].items()}
        vals = np.array(list(c.values()))
        med = np.median(vals)
        assert np.all(np.abs(vals / med - 1) <= 0.5)


def test_regularized_kernel_is_smooth_table(reg_sweep):
    k = reg_sweep[0.1].kernel
    assert not k.meta.singular
    v = k.value(np.array([0.0, 1e-4]))
    assert np.all(np.isfinite(v))


def test_riesz_regularization():
    base = kernel_from_label("riesz:0.5", 64)
    r = build_regularized(base, 0.1)
    assert r.property_report["a_min_mode"] >= -1e-10
    assert r.property_report["b_max_excess"] <= 0.1 + r.property_report["tol_grid"]
    assert r.property_report["d_recursion"]
