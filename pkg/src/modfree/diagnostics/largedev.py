"""Exponential moments of the modulated energy and the associated fixed point.

For a pair kernel ``W`` and density ``rho_bar`` with samples ``X ~ rho_bar^N``

    Z_N = (1/N) log E[ exp(-N F(mu_N)) ],
    F(mu) = int_{x != y} W(x - y) (d mu - d rho_bar)(x) (d mu - d rho_bar)(y).

A maximizer of ``-[F(mu) + int mu log(mu / rho_bar)]`` has the form
``rho_bar e^{2u} / M_u`` where ``u`` solves

    u = -W * (rho_bar (e^{2u} / M_u - 1)),     M_u = int rho_bar e^{2u}.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .. import rng
from ..particles import sample_density
from ..torus import grid_displacements, wavenumbers
from .energy import truncation_profile

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PairKernel:
    """Real even kernel given by Fourier coefficients on an n-grid, mean included."""

    coeffs: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.coeffs.shape[0]

    @property
    def dim(self):
        return self.coeffs.ndim

    @property
    def values(self):
        return np.real(np.fft.ifftn(self.coeffs)) * self.coeffs.size

    @property
    def at_zero(self):
        return float(np.sum(self.coeffs))

    def l1_norm(self):
        return float(np.mean(np.abs(self.values)))

    def scaled(self, factor):
        return PairKernel(self.coeffs * factor)


def zero_pair_kernel(n=64, dim=1):
    return PairKernel(np.zeros((n,) * dim))


def truncated_kernel(kernel, eta, l1=None, n=64):
    """Nonnegative short-range kernel ``(V + c) chi(|x|/eta)``.

    ``c = -min V`` lifts the smooth kernel ``V`` to be nonnegative and
    ``chi`` is the autocorrelation cutoff, so the result is nonnegative
    pointwise and has nonnegative Fourier coefficients whenever ``V`` does
    away from k = 0.  With ``l1`` given, the kernel is rescaled to that
    L1 norm.
    """
    c = kernel.coefficients(n)
    v = np.real(np.fft.ifftn(c)) * c.size
    lift = max(0.0, -float(v.min()))
    r = grid_displacements(n, kernel.dim)
    rad = np.sqrt(np.sum(r * r, axis=-1))
    w = (v + lift) * truncation_profile(rad / eta, "autocorrelation", kernel.dim)
    out = PairKernel(np.real(np.fft.fftn(w)) / w.size)
    if l1 is not None:
        out = out.scaled(l1 / out.l1_norm())
    return out


@dataclass(frozen=True)
class ZEstimate:
    """Monte Carlo value of ``Z_N`` with a bootstrap interval and diagnostics."""

    N: int
    value: float
    ci_low: float
    ci_high: float
    ess: float
    degenerate: bool
    samples: int


def _energy_exponents(W, rho_hat, x):
    """``-N F(mu_N)`` for each configuration in ``x`` of shape (S, N, d)."""
    S, N, dim = x.shape
    k = wavenumbers(W.n, dim)
    active = np.abs(W.coeffs) > 0
    kk = k[:, active]
    wk = np.real(W.coeffs[active])
    rk = rho_hat[active]
    out = np.empty(S)
    for s0 in range(0, S, 256):
        xs = x[s0:s0 + 256]
        mu = np.exp(-2j * np.pi * np.tensordot(xs, kk, axes=(2, 0))).mean(axis=1)
        full = np.sum(wk * np.abs(mu - rk) ** 2, axis=1)
        # remove the diagonal i = j from the double sum
        out[s0:s0 + 256] = -N * (full - W.at_zero / N)
    return out


def large_deviation_z(W, rho_bar, N, samples=10000, seed=0, resamples=200, min_ess=100.0):
    """Monte Carlo estimate of ``Z_N`` under ``rho_bar^N``.

    Parameters
    ----------
    W : PairKernel
    rho_bar : array_like
        Density on the kernel's n-grid.
    N : int
    samples : int
    seed : int
    resamples : int
        Bootstrap resamples of the 95% interval.
    min_ess : float
        Effective sample sizes below this flag a degenerate estimate.

    Returns
    -------
    ZEstimate
    """
    rho = np.asarray(getattr(rho_bar, "values", rho_bar), dtype=float)
    rho = rho / rho.mean()
    if rho.shape != W.coeffs.shape:
        raise ValueError("density grid must match the kernel grid")
    if not np.any(W.coeffs):
        return ZEstimate(N, 0.0, 0.0, 0.0, float(samples), False, samples)
    gen = rng.stream(seed, N, 0, rng.PURPOSE_MC)
    x = sample_density(rho, samples * N, gen).reshape(samples, N, -1)
    a = _energy_exponents(W, np.fft.fftn(rho) / rho.size, x)
    value = float(logsumexp(a) - np.log(samples)) / N
    wts = np.exp(a - a.max())
    ess = float(wts.sum() ** 2 / np.sum(wts ** 2))
    boot_gen = rng.stream(seed, N, 1, rng.PURPOSE_MC)
    idx = boot_gen.integers(0, samples, size=(resamples, samples))
    boots = (logsumexp(a[idx], axis=1) - np.log(samples)) / N
    lo, hi = np.percentile(boots, [2.5, 97.5])
    if ess < min_ess:
        log.warning("Z_N estimate at N=%d has effective sample size %.1f", N, ess)
    return ZEstimate(N, value, float(lo), float(hi), ess, ess < min_ess, samples)


class FixedPointDivergence(RuntimeError):
    def __init__(self, msg, trace):
        super().__init__(msg)
        self.trace = trace


@dataclass
class FixedPointResult:
    u: np.ndarray
    residual: float
    M_u: float
    iterations: int
    mu_bar: np.ndarray
    functional: float
    trace: list


def _convolve(W, f):
    return np.real(np.fft.ifftn(W.coeffs * np.fft.fftn(f)))


def _el_map(W, rho, u):
    e = np.exp(2.0 * u)
    M = float(np.mean(rho * e))
    return -_convolve(W, rho * (e / M - 1.0)), M


def large_deviation_functional(W, rho_bar, mu):
    """``-[F(mu) + int mu log(mu / rho_bar)]`` for a grid density ``mu``."""
    d = mu - rho_bar
    interaction = float(np.mean(_convolve(W, d) * d))
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = float(np.mean(np.where(mu > 0, mu * np.log(mu / rho_bar), 0.0)))
    return -(interaction + ent)


def euler_lagrange_fixed_point(W, rho_bar, tol=1e-12, max_iter=1000, gamma=0.5, u0=None,
                               patience=20):
    """Damped iteration ``u <- (1 - gamma) u + gamma T(u)`` for the fixed-point equation.

    ``gamma`` is halved whenever the residual ``max|u - T(u)|`` grows;
    ``patience`` consecutive increases abort with the residual trace.

    Returns
    -------
    FixedPointResult
    """
    rho = np.asarray(getattr(rho_bar, "values", rho_bar), dtype=float)
    if np.any(rho <= 0):
        raise ValueError("density must be strictly positive")
    rho = rho / rho.mean()
    if rho.shape != W.coeffs.shape:
        raise ValueError("density grid must match the kernel grid")
    u = np.zeros_like(rho) if u0 is None else np.array(u0, dtype=float)
    trace = []
    worse = 0
    it = 0
    for it in range(1, max_iter + 1):
        tu, M = _el_map(W, rho, u)
        res = float(np.max(np.abs(u - tu)))
        if trace and res > trace[-1]:
            worse += 1
            gamma *= 0.5
            if worse >= patience:
                raise FixedPointDivergence("residual grew over %d sweeps" % patience, trace)
        else:
            worse = 0
        trace.append(res)
        u = (1.0 - gamma) * u + gamma * tu
        if res <= tol:
            break
    tu, M = _el_map(W, rho, u)
    residual = float(np.max(np.abs(u - tu)))
    mu = rho * np.exp(2.0 * u) / M
    return FixedPointResult(u, residual, M, it, mu, large_deviation_functional(W, rho, mu), trace)
