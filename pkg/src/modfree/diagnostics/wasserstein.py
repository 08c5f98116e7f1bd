"""Wasserstein-1 distances on the circle and sliced distances on the 2-torus.

On the circle ``W1(mu, nu) = min_c int_0^1 |F_mu(x) - F_nu(x) - c| dx`` and
the minimizing shift is a median of ``F_mu - F_nu``.  CDFs are evaluated at
the midpoints of a fine uniform partition.
"""

from math import gcd

import numpy as np

FINE = 2 ** 16


def _density_cdf(values, M):
    """Periodic part of the CDF of the trigonometric interpolant of a grid density.

    The CDF is ``c_0 x + P(x)``; constants are irrelevant because the
    distance minimizes over shifts.
    """
    c = np.fft.fft(values) / values.size
    n = values.size
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        c[n // 2] = 0.0
    x = (np.arange(M) + 0.5) / M
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(k != 0, c / (2j * np.pi * k), 0.0)
    # evaluate the series at the midpoints through a zero-padded transform
    big = np.zeros(M, dtype=complex)
    half = n // 2
    big[:half] = p[:half]
    big[M - half:] = p[n - half:]
    big *= np.exp(2j * np.pi * np.fft.fftfreq(M, d=1.0 / M) * 0.5 / M)
    return np.real(c[0]) * x + np.real(np.fft.ifft(big)) * M


def _points_cdf(points, M):
    s = np.sort(np.mod(np.asarray(points, dtype=float).reshape(-1), 1.0))
    x = (np.arange(M) + 0.5) / M
    return np.searchsorted(s, x, side="right") / s.size


def _cdf(obj, M):
    """CDF of a grid density (1D array, unit mean) or of positions (shape (N, 1))."""
    a = np.asarray(getattr(obj, "values", obj), dtype=float)
    if a.ndim == 2 and a.shape[1] == 1:
        return _points_cdf(a[:, 0], M)
    if a.ndim != 1:
        raise ValueError("circle distances need 1D densities or (N, 1) positions")
    mass = a.mean()
    if abs(mass - 1.0) > 1e-8:
        raise ValueError(f"density mass {mass!r} differs from 1")
    return _density_cdf(a, M)


def circular_w1(mu, nu, M=FINE):
    """Exact circular W1 up to the midpoint rule on ``M`` cells.

    ``mu`` and ``nu`` are grid densities (1D arrays or GridField with unit
    mean) or particle positions of shape (N, 1).
    """
    g = _cdf(mu, M) - _cdf(nu, M)
    return float(np.mean(np.abs(g - np.median(g))))


def primitive_directions(count):
    """First ``count`` primitive integer directions of the half plane, by length."""
    out = []
    r = 1
    while len(out) < count:
        cand = [(p, q) for p in range(-r, r + 1) for q in range(0, r + 1)
                if max(abs(p), q) == r and (q > 0 or p > 0) and gcd(abs(p), q) == 1]
        cand.sort(key=lambda v: (v[0] ** 2 + v[1] ** 2, np.arctan2(v[1], v[0])))
        out.extend(cand)
        r += 1
    out = sorted(out, key=lambda v: (v[0] ** 2 + v[1] ** 2, np.arctan2(v[1], v[0])))
    return out[:count]


def _slice_density(values, p, q):
    """Push a 2D grid density forward by ``x -> p x_1 + q x_2 mod 1``."""
    n = values.shape[0]
    c = np.fft.fft2(values) / values.size
    m = n // max(abs(p), abs(q))
    out = np.zeros(m, dtype=complex)
    for j in range(-(m // 2) + 1, m // 2):
        out[j % m] = c[(j * p) % n, (j * q) % n]
    return np.real(np.fft.ifft(out)) * m


def sliced_w1(mu, nu, slices=64, M=FINE):
    """Sliced W1 on the 2-torus over primitive integer directions.

    Each slice projects by ``x -> (p x_1 + q x_2) mod 1``, solves the
    circle problem and divides by ``|(p, q)|``; the result is the average
    over ``slices`` directions and is an approximation of W1.
    """
    out = []
    for p, q in primitive_directions(slices):
        parts = []
        for obj in (mu, nu):
            v = np.asarray(getattr(obj, "values", obj), dtype=float)
            if v.ndim == 2 and v.shape[1] == 2 and not v.shape[0] == v.shape[1] >= 4:
                parts.append(np.mod(v @ np.array([p, q], dtype=float), 1.0)[:, None])
            else:
                if abs(v.mean() - 1.0) > 1e-8:
                    raise ValueError("density mass differs from 1")
                parts.append(_slice_density(v, p, q))
        out.append(circular_w1(parts[0], parts[1], M) / np.hypot(p, q))
    return float(np.mean(out))


def wasserstein1(mu, nu, dim=1, slices=64):
    """Circular W1 for ``dim=1`` and sliced W1 for ``dim=2``."""
    if dim == 1:
        return circular_w1(mu, nu)
    if dim == 2:
        return sliced_w1(mu, nu, slices)
    raise ValueError("dim must be 1 or 2")
