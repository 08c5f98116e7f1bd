"""Fourier-side control of the commutator term and the convexity inequality."""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .. import rng
from ..kernels import tabulated_kernel
from ..regularizer import mollifier_hat
from ..torus import grid_points, minimal_image, wavenumbers


def _random_measure(gen, n, dim, atoms=2, modes=0, max_mode=2):
    """Zero-mass signed measure: equal point masses minus a smooth density.

    The density is uniform plus ``modes`` random cosine modes of frequency
    at most ``max_mode``, discretized on the n-grid so the measure is
    purely atomic.
    """
    x = gen.random((atoms, dim))
    w = np.full(atoms, 1.0 / atoms)
    y = grid_points(n, dim).reshape(-1, dim)
    dens = np.ones(y.shape[0])
    for _ in range(modes):
        k = gen.integers(1, max_mode + 1, size=dim)
        dens += 0.9 / modes * gen.random() * np.cos(2 * np.pi * (y @ k) + 2 * np.pi * gen.random())
    dens /= dens.sum()
    return np.concatenate([x, y]), np.concatenate([w, -dens])


@dataclass(frozen=True)
class FourierLemmaResult:
    max_ratio: float
    ratios: np.ndarray
    skipped: int


def smoothed_kernel(kernel, delta):
    """``K1_delta * V`` as a tabulated kernel, truncated where ``K1_hat`` is below 1e-12."""
    n = 2 ** int(np.ceil(np.log2(64.0 / delta)))
    k = wavenumbers(n, kernel.dim)
    kn = np.sqrt(np.sum(k.astype(float) ** 2, axis=0))
    coeffs = kernel.coefficients(n) * mollifier_hat(delta * kn, kernel.dim)
    return tabulated_kernel(coeffs, meta=kernel.meta, params={"source": kernel.label,
                                                              "smoothing": delta})


def commutator_lhs(kernel, psi, points, weights):
    """``-int int grad V(x - y) . (psi(x) - psi(y)) d nu(x) d nu(y)`` summed over atom pairs."""
    dim = kernel.dim
    x = np.asarray(points, dtype=float).reshape(-1, dim)
    w = np.asarray(weights, dtype=float)
    p = np.asarray(psi(x), dtype=float).reshape(len(w), dim)
    disp = minimal_image(x[:, None, :] - x[None, :, :])
    grad = kernel.gradient(disp)
    dpsi = p[:, None, :] - p[None, :, :]
    # the diagonal carries psi(x) - psi(x) = 0
    return -float(w @ np.sum(grad * dpsi, axis=-1) @ w)


def spectral_rhs(kernel, points, weights, alpha=None, f_sigma=0.0):
    """``sum_k (V_hat(k) + f / (1 + |k|^(d - alpha))) |nu_hat(k)|^2``.

    With ``f_sigma = 0`` this is ``sum_k V_hat(k) |nu_hat(k)|^2``.
    """
    dim = kernel.dim
    n = kernel.n
    k = wavenumbers(n, dim)
    weight = kernel.coefficients(n).copy()
    if f_sigma:
        alpha = kernel.meta.alpha if alpha is None else alpha
        kn = np.sqrt(np.sum(k.astype(float) ** 2, axis=0))
        extra = f_sigma / (1.0 + kn ** (dim - alpha))
        extra[(0,) * dim] = 0.0
        weight = weight + extra
    x = np.asarray(points, dtype=float).reshape(-1, dim)
    phase = np.exp(-2j * np.pi * np.tensordot(x, k, axes=(1, 0)))
    nu_hat = np.tensordot(np.asarray(weights, dtype=float), phase, axes=(0, 0))
    return float(np.sum(weight * np.abs(nu_hat) ** 2))


def fourier_lemma_check(kernel, psi, trials=100, seed=0, delta=1.0 / 16, grid=32,
                        atoms=2, modes=0, alpha=None, f_sigma=0.0):
    """Largest ratio LHS/RHS over random zero-mass signed measures.

    Point masses have infinite self-energy under a singular kernel, so both
    sides use the mollified kernel ``K1_delta * V``, which keeps
    ``V_hat >= 0``.  The left side sums the kernel gradient over all pairs
    of atoms; the right side is a Fourier sum.

    Parameters
    ----------
    kernel : KernelSpec
    psi : callable
        Maps points of shape (M, d) to vectors of shape (M, d).
    trials : int
    seed : int
        Measure ``t`` is drawn from the Monte Carlo stream of replica ``t``,
        so a larger trial set extends a smaller one.
    delta : float
        Mollification scale.
    grid : int
        Resolution of the smooth part of each measure.
    atoms, modes : int
        Point masses per measure and random cosine modes in its smooth part.
    alpha, f_sigma : float
        Remainder term of the right-hand side.

    Returns
    -------
    FourierLemmaResult
    """
    smooth = smoothed_kernel(kernel, delta)
    ratios = []
    skipped = 0
    for t in range(trials):
        gen = rng.stream(seed, t, 0, rng.PURPOSE_MC)
        pts, w = _random_measure(gen, grid, kernel.dim, atoms, modes)
        rhs = spectral_rhs(smooth, pts, w, alpha, f_sigma)
        lhs = commutator_lhs(smooth, psi, pts, w)
        if rhs == 0.0 and lhs == 0.0:
            skipped += 1
            continue
        ratios.append(lhs / max(rhs, 1e-14))
    ratios = np.array(ratios)
    return FourierLemmaResult(float(ratios.max()) if ratios.size else 0.0, ratios, skipped)


@dataclass(frozen=True)
class ConvexityResult:
    """Both sides of ``int psi d rho_N <= H/alpha + (1/(alpha N)) log int exp(alpha N psi) d rho_bar_N``."""

    lhs: float
    entropy_term: float
    moment_term: float
    ess: float
    reliable: bool

    @property
    def rhs(self):
        return self.entropy_term + self.moment_term

    @property
    def slack(self):
        return self.rhs - self.lhs


def convexity_bound(psi_N, rho_bar, alpha, N, rho_N=None, samples=10000, seed=0,
                    min_ess=100.0, quadrature=False):
    """Evaluate the convexity (Donsker-Varadhan) inequality.

    Parameters
    ----------
    psi_N : callable
        Maps configurations of shape (M, N) (particles on the circle) to
        values of shape (M,).
    rho_bar : array_like
        One-particle density on an m-grid.
    alpha : float
    N : int
    rho_N : ndarray, optional
        Joint density on the ``m^N`` grid; defaults to ``rho_bar^N``.
    samples : int
        Monte Carlo draws from ``rho_bar^N`` for the log-moment.
    quadrature : bool
        Use grid quadrature for the log-moment instead (small N only).

    Returns
    -------
    ConvexityResult
    """
    from ..liouville import _tensor, relative_entropy
    from ..particles import sample_density
    rho_bar = np.asarray(getattr(rho_bar, "values", rho_bar), dtype=float)
    rho_bar = rho_bar / rho_bar.mean()
    m = rho_bar.shape[0]
    prod = _tensor(rho_bar, N)
    if rho_N is None:
        rho_N = prod
    rho_N = np.asarray(rho_N, dtype=float)
    nodes = np.stack(np.meshgrid(*([np.arange(m) / m] * N), indexing="ij"), axis=-1).reshape(-1, N)
    psi_grid = np.asarray(psi_N(nodes), dtype=float)
    lhs = float(np.mean(rho_N.reshape(-1) * psi_grid))
    entropy = relative_entropy(rho_N, rho_bar) / alpha
    if quadrature:
        logw = np.log(prod.reshape(-1) / prod.size)
        moment = float(logsumexp(alpha * N * psi_grid + logw)) / (alpha * N)
        return ConvexityResult(lhs, entropy, moment, float(prod.size), True)
    gen = rng.stream(seed, 0, 0, rng.PURPOSE_MC)
    draws = sample_density(rho_bar, samples * N, gen)[:, 0].reshape(samples, N)
    a = alpha * N * np.asarray(psi_N(draws), dtype=float)
    moment = float(logsumexp(a) - np.log(samples)) / (alpha * N)
    wts = np.exp(a - a.max())
    ess = float(wts.sum() ** 2 / np.sum(wts ** 2))
    return ConvexityResult(lhs, entropy, moment, ess, ess >= min_ess)
