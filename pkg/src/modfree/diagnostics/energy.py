"""Sample estimators of the modulated interaction energy and its variants."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats
from scipy.special import j0

from .. import rng
from ..liouville import LiouvilleState
from ..particles import EnsembleState
from ..regularizer import mollifier_hat
from ..torus import evaluate_series, minimal_image, wavenumbers
from .gibbs import MeanFieldPotential, as_configuration, pair_values


@dataclass(frozen=True)
class Estimate:
    """Replica mean with standard error and a bootstrap 95% interval."""

    mean: float
    se: float
    ci_low: float
    ci_high: float
    values: np.ndarray

    @property
    def n(self):
        return len(self.values)


def summarize(values, seed=0, resamples=200):
    """Mean, standard error and percentile bootstrap interval of replica values."""
    v = np.asarray(values, dtype=float)
    if v.size == 1:
        return Estimate(float(v[0]), np.nan, np.nan, np.nan, v)
    se = float(v.std(ddof=1) / np.sqrt(v.size))
    if np.ptp(v) == 0:
        return Estimate(float(v.mean()), se, float(v[0]), float(v[0]), v)
    res = stats.bootstrap((v,), np.mean, n_resamples=resamples, method="percentile",
                          random_state=rng.stream(seed, 0, 0, rng.PURPOSE_MC))
    ci = res.confidence_interval
    return Estimate(float(v.mean()), se, float(ci.low), float(ci.high), v)


def _configurations(sample, dim):
    if isinstance(sample, EnsembleState):
        pos = sample.positions[~sample.aborted]
    else:
        pos = np.asarray(sample, dtype=float)
        if pos.ndim == 1:
            pos = pos[None, :, None]
        elif pos.ndim == 2:
            pos = pos[None] if dim > 1 else pos[:, :, None]
    return pos


def modulated_energy_config(x, kernel, pot, sigma=None):
    """``(1/(2 sigma)) int_{x != y} V (d mu_N - d rho_bar)^2`` for one configuration.

    With ``sigma=None`` the bracket itself (the ``sigma``-scaled form
    ``2 sigma K_N``) is returned.
    """
    x = as_configuration(x, kernel.dim)
    N = x.shape[0]
    bracket = pair_values(x, kernel).sum() / N ** 2 - 2.0 / N * pot(x).sum() + pot.self_energy
    return float(bracket) if sigma is None else float(bracket) / (2.0 * sigma)


def modulated_energy(sample, rho_bar, kernel, sigma, scaled=False, seed=0):
    """Modulated potential energy ``K_N``.

    Parameters
    ----------
    sample : EnsembleState, array of shape (R, N, d), or LiouvilleState
    rho_bar : array_like or GridField
    kernel : KernelSpec
    sigma : float
    scaled : bool
        Return ``sigma K_N``, the form used when ``sigma`` vanishes.
    seed : int
        Seed of the bootstrap interval.

    Returns
    -------
    Estimate, or float for a LiouvilleState.
    """
    if isinstance(sample, LiouvilleState):
        from .modulated import modulated_energy_state
        return modulated_energy_state(sample, rho_bar, kernel, sigma)
    if not scaled and not sigma > 0:
        raise ValueError("K_N needs sigma > 0; use scaled=True for sigma K_N")
    pot = MeanFieldPotential(rho_bar, kernel)
    factor = 0.5 if scaled else 1.0 / (2.0 * sigma)
    vals = [factor * modulated_energy_config(x, kernel, pot) for x in _configurations(sample, kernel.dim)]
    return summarize(vals, seed)


def truncation_profile(r, profile="flat", dim=1):
    """Radial cutoff ``chi(r)`` vanishing for ``r >= 2``.

    ``flat`` equals 1 on ``[0, 1]`` with a smooth monotone transition on
    ``[1, 2]``.  ``autocorrelation`` is the mollifier ``K1(r/2) / K1(0)``,
    whose Fourier transform is nonnegative, at the price of dropping below
    1 inside the unit ball.
    """
    r = np.abs(np.asarray(r, dtype=float))
    if profile == "flat":
        t = np.clip(r - 1.0, 0.0, 1.0)

        def g(s):
            with np.errstate(divide="ignore", over="ignore"):
                return np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        return g(1.0 - t) / (g(1.0 - t) + g(t))
    if profile == "autocorrelation":
        rr, vals = _autocorrelation_table(dim)
        return np.interp(r, rr, vals, right=0.0)
    raise ValueError(f"unknown truncation profile {profile!r}")


@lru_cache(maxsize=2)
def _autocorrelation_table(dim):
    # inverse transform of K1_hat, which is negligible beyond |xi| = 64
    xi = np.linspace(0.0, 64.0, 8193)
    w = np.full(xi.size, xi[1] - xi[0])
    w[[0, -1]] *= 0.5
    rr = np.linspace(0.0, 2.0, 2049)
    s = 0.5 * rr
    if dim == 1:
        vals = 2.0 * np.cos(2 * np.pi * np.outer(s, xi)) @ (w * mollifier_hat(xi, 1))
    else:
        vals = 2 * np.pi * j0(2 * np.pi * np.outer(s, xi)) @ (w * xi * mollifier_hat(xi, 2))
    vals = np.maximum(vals / vals[0], 0.0)
    vals[-1] = 0.0
    return rr, vals


def remainder_kernel_grid(kernel, eta, n, profile="flat"):
    """Samples of ``V (1 - chi(|x|/eta))`` on the n-grid; zero for ``|x| < eta``."""
    from ..torus import grid_displacements
    r = grid_displacements(n, kernel.dim)
    rad = np.sqrt(np.sum(r * r, axis=-1))
    w = 1.0 - truncation_profile(rad / eta, profile, kernel.dim)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(w > 0, kernel.value(np.where(rad[..., None] > 0, r, 0.25)), 0.0)
    return v * w


def truncated_energy(sample, rho_bar, kernel, sigma, eta, profile="flat", seed=0):
    """Modulated energy with ``V`` replaced by ``V chi(|x|/eta)``.

    The cut part ``V (1 - chi)`` vanishes near the origin, so it is handled
    by grid quadrature while the full kernel keeps its exact treatment.
    """
    if not 0.0 < eta:
        raise ValueError("eta must be positive")
    rho = np.asarray(getattr(rho_bar, "values", rho_bar), dtype=float)
    n = rho.shape[0]
    full = modulated_energy(sample, rho, kernel, sigma, seed=seed)
    rem_grid = remainder_kernel_grid(kernel, eta, n, profile)
    if not np.any(rem_grid):
        return full
    rem_hat = np.fft.fftn(rem_grid) / rem_grid.size
    rho_hat = np.fft.fftn(rho) / rho.size
    conv_hat = rem_hat * rho_hat
    self_rem = float(np.real(np.sum(rem_hat * np.abs(rho_hat) ** 2)))
    vals = []
    for x, k_full in zip(_configurations(sample, kernel.dim), full.values):
        N = x.shape[0]
        disp = minimal_image(x[:, None, :] - x[None, :, :])
        rad = np.sqrt(np.sum(disp * disp, axis=-1))
        np.fill_diagonal(rad, 0.0)
        wcut = 1.0 - truncation_profile(rad / eta, profile, kernel.dim)
        np.fill_diagonal(wcut, 0.0)
        pair = (pair_values(x, kernel) * wcut).sum()
        pot = evaluate_series(conv_hat, x).sum()
        rem = (pair / N ** 2 - 2.0 / N * pot + self_rem) / (2.0 * sigma)
        vals.append(k_full - rem)
    return summarize(vals, seed)


def close_pair_energy(sample, kernel, delta, seed=0):
    """Replica mean of ``(1/N^2) sum_{i != j} V(x_i - x_j) 1{|x_i - x_j| <= delta}``."""
    vals = []
    for x in _configurations(sample, kernel.dim):
        N = x.shape[0]
        disp = minimal_image(x[:, None, :] - x[None, :, :])
        rad = np.sqrt(np.sum(disp * disp, axis=-1))
        np.fill_diagonal(rad, np.inf)
        close = rad <= delta
        if not np.any(close):
            vals.append(0.0)
            continue
        vals.append(float(pair_values(x, kernel)[close].sum()) / N ** 2)
    return summarize(vals, seed)


def signed_measure_energy(kernel, points, weights, density=None, n=None, method="spectral"):
    """Interaction energy ``int V d nu^2`` (diagonal included) of a signed measure.

    ``nu = sum_a w_a delta_{x_a} - density``, with ``V`` the kernel's
    Fourier series truncated at ``n`` modes per axis.

    ``method="spectral"`` returns ``sum_k V_hat(k) |nu_hat(k)|^2``;
    ``method="direct"`` sums the truncated series over all pairs of atoms
    and integrates the density part by the trapezoidal rule, which is exact
    for the band-limited integrands involved; density-density pairs read
    ``V`` from its table at the grid nodes.
    """
    dim = kernel.dim
    x = as_configuration(points, dim)
    w = np.asarray(weights, dtype=float)
    if density is not None:
        density = np.asarray(getattr(density, "values", density), dtype=float)
        n = density.shape[0] if n is None else n
        if density.shape[0] != n:
            raise ValueError("density grid must match the mode count")
    n = kernel.n if n is None else n
    vhat = kernel.coefficients(n)
    if method == "spectral":
        k = wavenumbers(n, dim)
        phase = np.exp(-2j * np.pi * np.tensordot(x, k, axes=(1, 0)))
        nu_hat = np.tensordot(w, phase, axes=(0, 0))
        if density is not None:
            nu_hat = nu_hat - np.fft.fftn(density) / density.size
        return float(np.sum(vhat * np.abs(nu_hat) ** 2))
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    disp = (x[:, None, :] - x[None, :, :]).reshape(-1, dim)
    total = float(w @ evaluate_series(vhat, disp).reshape(len(w), len(w)) @ w)
    if density is None:
        return total
    from ..torus import grid_points
    y = grid_points(n, dim).reshape(-1, dim)
    g = density.reshape(-1) / y.shape[0]
    cross = evaluate_series(vhat, (x[:, None, :] - y[None, :, :]).reshape(-1, dim))
    total -= 2.0 * float(w @ cross.reshape(len(w), -1) @ g)
    # grid-to-grid displacements are grid nodes, so V is read from its node table
    vgrid = np.real(np.fft.ifftn(vhat)) * vhat.size
    idx = np.indices((n,) * dim).reshape(dim, -1)
    gg = g.reshape((n,) * dim)
    dd = 0.0
    for a in range(idx.shape[1]):
        shift = tuple((idx[:, a:a + 1] - idx) % n)
        dd += g[a] * float(np.sum(gg.reshape(-1) * vgrid[shift]))
    return total + dd
