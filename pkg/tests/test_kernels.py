import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from modfree.hypotheses import check_hypotheses
from modfree.kernels import (build_kernel, eval_force, kernel_from_label, tabulated_kernel,
                             zero_kernel)
from modfree.tables import export_kernel, import_kernel, read_table, write_table
from modfree.torus import inverse_transform

LABELS = ["periodic-log", "riesz:0.5", "cosine-test", "pks:0.5"]


def test_periodic_log_coefficients():
    k = kernel_from_label("periodic-log", 64)
    assert k.spectral_table.at(3) == pytest.approx(1 / 6, abs=1e-12)
    assert k.spectral_table.at(0) == 0.0


def test_cosine_value_at_origin():
    k = kernel_from_label("cosine-test", 32)
    assert k.grid_table.values[0] == 1.0


@pytest.mark.parametrize("label", LABELS)
def test_even_and_zero_mean(label):
    k = kernel_from_label(label, 64)
    v = k.grid_table.values
    np.testing.assert_array_equal(v[1:], v[1:][::-1])
    assert k.spectral_table.coeffs[0] == 0.0


@pytest.mark.parametrize("label", ["periodic-log", "riesz:0.5", "cosine-test"])
def test_repulsive_coefficients_nonnegative(label):
    assert kernel_from_label(label, 256).coefficients().min() >= -1e-10


def riesz_oracle(x, s):
    return float(mpmath.zeta(s, x) + mpmath.zeta(s, 1 - x))


def test_riesz_values_match_hurwitz_zeta():
    k = kernel_from_label("riesz:0.5", 256)
    for x in (0.01, 0.1, 0.3, 0.5, 0.77):
        assert k.value(np.array([x])) == pytest.approx(riesz_oracle(x, 0.5), rel=1e-12)


def test_riesz_leading_behaviour():
    # the periodic part adds the constant 2 zeta(1/2) at the origin
    c = 2 * float(mpmath.zeta(0.5))
    k = kernel_from_label("riesz:0.5", 256)
    lead = [(k.value(np.array([2.0 ** -j])) - c) * 2.0 ** (-j / 2) for j in range(4, 8)]
    assert np.max(np.abs(np.diff(lead)) / np.abs(lead[:-1])) <= 0.05
    raw = [k.value(np.array([2.0 ** -j])) * 2.0 ** (-j / 2) for j in range(10, 14)]
    assert np.max(np.abs(np.diff(raw)) / np.abs(raw[:-1])) <= 0.05
    assert min(lead) > 0


def test_riesz_coefficients_match_quadrature():
    # c_j = 2 int_0^1/2 V(x) cos(2 pi j x) dx with V from the Hurwitz zeta oracle
    c = kernel_from_label("riesz:0.5", 256).coefficients()
    mpmath.mp.dps = 20
    for j in (1, 2, 5):
        f = lambda x: (mpmath.zeta(0.5, x) + mpmath.zeta(0.5, 1 - x)) * mpmath.cos(2 * mpmath.pi * j * x)
        assert c[j] == pytest.approx(float(2 * mpmath.quad(f, [0, 0.25, 0.5])), rel=1e-10)


def test_periodic_log_exact_identities():
    k = kernel_from_label("periodic-log", 256)
    assert k.value(np.array([0.25])) == pytest.approx(-np.log(np.sqrt(2)), abs=1e-8)
    c = k.coefficients()
    for j in range(1, 33):
        assert c[j] == pytest.approx(1 / (2 * j), abs=1e-8)


def test_force_examples():
    f, n = eval_force(kernel_from_label("cosine-test", 64), np.array([[0.25]]))
    assert f[0, 0] == pytest.approx(2 * np.pi) and n == 0
    f, _ = eval_force(kernel_from_label("periodic-log", 256), np.array([[0.25]]))
    assert f[0, 0] == pytest.approx(np.pi, abs=1e-6)


@pytest.mark.parametrize("label", LABELS)
@given(r=st.floats(0.002, 0.498))
def test_force_antisymmetric(label, r):
    k = kernel_from_label(label, 256)
    f, _ = eval_force(k, np.array([[r], [-r]]))
    assert abs(f[0, 0] + f[1, 0]) <= 1e-10 * max(1.0, abs(f[0, 0]))


def test_force_cap_counts():
    k = kernel_from_label("periodic-log", 64)
    f, n = eval_force(k, np.array([[1e-6], [0.0], [0.2]]))
    assert n == 2
    assert f[1, 0] == 0.0
    capped, _ = eval_force(k, np.array([[0.5 / 64]]))
    assert f[0, 0] == pytest.approx(capped[0, 0])


@pytest.mark.parametrize("label", ["periodic-log", "riesz:0.5"])
def test_spectral_grid_consistency_converges(label):
    # the truncated series approaches the closed form off the diagonal as n grows
    errs = []
    for n in (64, 256, 1024):
        k = kernel_from_label(label, n)
        r = np.arange(n) / n
        off = (r >= 2 / n) & (r <= 1 - 2 / n) & (np.abs(r - 0.5) > 1e-12)
        synth = inverse_transform(k.spectral_table).values
        sel = off & (np.abs(r - 0.25) < 0.125)
        errs.append(np.max(np.abs(synth[sel] - k.grid_table.values[sel])))
    assert errs[2] < errs[1] < errs[0]


def test_smooth_kernel_spectral_grid_exact():
    k = kernel_from_label("cosine-test", 64)
    np.testing.assert_allclose(inverse_transform(k.spectral_table).values,
                               k.grid_table.values, atol=1e-12)


def test_build_kernel_validation():
    with pytest.raises(ValueError):
        build_kernel("riesz", {"s": 1.5}, 64)
    with pytest.raises(ValueError):
        build_kernel("pks", {"lambda": -1}, 64)
    with pytest.raises(ValueError):
        build_kernel("periodic-log", None, 48)
    with pytest.raises(ValueError):
        build_kernel("nope", None, 64)
    with pytest.raises(ValueError):
        kernel_from_label("cosine-test:3")


def test_two_dimensional_log_kernel():
    k = kernel_from_label("periodic-log", 64, dim=2)
    c = k.coefficients()
    assert c.min() >= -1e-12
    v = k.grid_table.values
    np.testing.assert_allclose(v, v.T, atol=1e-12)


def test_tabulated_and_zero():
    base = kernel_from_label("cosine-test", 32)
    t = tabulated_kernel(base.coefficients())
    np.testing.assert_allclose(t.value(np.array([0.1, 0.3])),
                               np.cos(2 * np.pi * np.array([0.1, 0.3])), atol=1e-9)
    z = zero_kernel(32)
    assert not np.any(z.coefficients())
    assert t.meta.sign == "repulsive"


def test_hypothesis_reports():
    rep = check_hypotheses(kernel_from_label("periodic-log", 256))
    assert rep["hyp03"].status == "pass"
    assert all(e.n == 256 for e in rep.entries.values())
    rep = check_hypotheses(kernel_from_label("cosine-test", 64))
    assert rep["hyp03"].status == "pass"
    assert rep["hyp04"].status == "not-applicable"
    rep = check_hypotheses(kernel_from_label("pks:0.5", 64))
    assert rep["hyp03"].status == "fail"
    assert rep.sign == "attractive"
    d = rep.to_dict()
    assert d["entries"]["hyp03"]["status"] == "fail"


@pytest.mark.parametrize("binary", [False, True])
def test_kernel_table_round_trip(tmp_path, binary):
    k = kernel_from_label("riesz:0.5", 64)
    path = tmp_path / ("k.bin" if binary else "k.csv")
    export_kernel(k, path, binary=binary)
    back = import_kernel(path)
    np.testing.assert_array_equal(back.grid_table.values, k.grid_table.values)
    np.testing.assert_array_equal(back.spectral_table.coeffs, k.spectral_table.coeffs)
    assert back.meta == k.meta and back.family == "tabulated"


def test_field_table_round_trip(tmp_path):
    v = np.random.default_rng(0).random((8, 8))
    write_table(tmp_path / "f.csv", {"kind": "density"}, v)
    header, values, coeffs = read_table(tmp_path / "f.csv")
    np.testing.assert_array_equal(values, v)
    assert coeffs is None and header["kind"] == "density"
    with pytest.raises(ValueError):
        import_kernel(tmp_path / "f.csv")
