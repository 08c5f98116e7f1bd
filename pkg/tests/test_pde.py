import numpy as np
import pytest

from modfree.kernels import kernel_from_label, zero_kernel
from modfree.pde import (PdeAbort, advance, cfl_dt, free_energy, make_state, potential_field,
                         run_pde, velocity_field)

X = np.arange(64) / 64


def test_heat_mode_decay():
    sigma, T = 0.1, 0.2
    st = make_state(1 + 0.5 * np.cos(2 * np.pi * X), sigma, zero_kernel(64))
    out = run_pde(st, T, 1e-2)[-1]
    exact = 1 + 0.5 * np.exp(-4 * np.pi ** 2 * sigma * T) * np.cos(2 * np.pi * X)
    np.testing.assert_allclose(out.rho.values, exact, atol=1e-12)


def test_uniform_is_fixed():
    st = make_state(np.ones(64), 0.5, kernel_from_label("periodic-log", 64))
    out = run_pde(st, 0.05, 1e-3)[-1]
    np.testing.assert_allclose(out.rho.values, 1.0, atol=1e-13)


def test_cosine_velocity_and_potential():
    k = kernel_from_label("cosine-test", 64)
    rho = 1 + 0.5 * np.cos(2 * np.pi * X)
    np.testing.assert_allclose(potential_field(rho, k), 0.25 * np.cos(2 * np.pi * X), atol=1e-14)
    np.testing.assert_allclose(velocity_field(rho, k)[0], 0.5 * np.pi * np.sin(2 * np.pi * X),
                               atol=1e-13)


def test_mass_conserved_with_interaction():
    k = kernel_from_label("periodic-log", 128)
    st = make_state(1 + 0.5 * np.cos(2 * np.pi * np.arange(128) / 128), 0.2, k)
    for s in run_pde(st, 0.05, 1e-3, stride=10):
        assert s.rho.values.mean() == pytest.approx(1.0, abs=1e-13)


def test_linear_interaction_rate():
    # small amplitude, cosine kernel: u = pi a sin, so a decays at rate 4 pi^2 sigma + 2 pi^2
    k = kernel_from_label("cosine-test", 64)
    a0, sigma, T = 1e-6, 0.05, 0.1
    st = make_state(1 + a0 * np.cos(2 * np.pi * X), sigma, k)
    out = run_pde(st, T, 1e-3)[-1]
    amp = 2 * np.real(np.fft.fft(out.rho.values)[1]) / 64
    rate = 4 * np.pi ** 2 * sigma + 2 * np.pi ** 2
    assert amp == pytest.approx(a0 * np.exp(-rate * T), rel=1e-6)


def test_free_energy_decreases():
    k = kernel_from_label("periodic-log", 128)
    st = make_state(1 + 0.8 * np.cos(2 * np.pi * np.arange(128) / 128), 0.3, k)
    F = [free_energy(s).total for s in run_pde(st, 0.1, 1e-3, stride=10)]
    assert np.all(np.diff(F) < 0)


def test_relaxation_to_uniform():
    k = kernel_from_label("periodic-log", 64)
    out = run_pde(make_state(1 + 0.5 * np.cos(2 * np.pi * X), 0.5, k), 1.0, 1e-2)[-1]
    assert np.max(np.abs(out.rho.values - 1)) < 1e-6


def test_cfl_subdivision_and_abort():
    k = kernel_from_label("pks:20", 64)
    st = make_state(1 + 0.9 * np.cos(2 * np.pi * X), 1e-3, k)
    assert cfl_dt(st) < 0.05
    with pytest.raises(PdeAbort) as info:
        run_pde(st, 2.0, 0.05)
    assert info.value.state.t < 2.0


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        make_state(np.ones((8, 8)), 0.1, zero_kernel(8))


def test_two_dimensional_heat():
    n = 32
    x = np.arange(n) / n
    rho = 1 + 0.3 * np.cos(2 * np.pi * (x[:, None] + 2 * x[None, :]))
    st = make_state(rho, 0.05, zero_kernel(n, dim=2))
    out = advance(st, 0.1)
    exact = 1 + 0.3 * np.exp(-4 * np.pi ** 2 * 0.05 * 5 * 0.1) * (rho - 1) / 0.3
    np.testing.assert_allclose(out.rho.values, exact, atol=1e-12)
