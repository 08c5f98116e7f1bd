"""Periodic geometry, uniform grids and discrete Fourier transforms on the unit torus.

Fourier convention
------------------
A grid field ``f`` with ``n`` points per axis is mapped to coefficients

    c_k = n^{-d} sum_j f(x_j) exp(-2 pi i k . x_j),

so that ``f(x_j) = sum_k c_k exp(2 pi i k . x_j)``.  With this scaling a pure
cosine ``cos(2 pi x)`` has coefficients 1/2 at k = +-1 and Parseval reads
``sum |c_k|^2 = mean(f^2)``.  Coefficient arrays are stored in numpy FFT
order (index ``j`` stands for the integer mode ``j`` if ``j < n/2`` and
``j - n`` otherwise).
"""

from dataclasses import dataclass

import numpy as np


def _is_power_of_two(n):
    return n > 0 and (n & (n - 1)) == 0


def check_grid_size(n):
    """Validate a grid size (even, power of two) and return it as int."""
    n = int(n)
    if n < 2 or not _is_power_of_two(n):
        raise ValueError(f"grid size must be a power of two >= 2, got {n}")
    return n


def wrap(x):
    """Reduce coordinates modulo one into [0, 1).

    Parameters
    ----------
    x : array_like
        Raw coordinates of any shape.

    Returns
    -------
    ndarray
        Coordinates in [0, 1).
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("wrap: non-finite coordinate")
    y = np.mod(x, 1.0)
    # np.mod can return exactly 1.0 for tiny negative inputs
    y[y >= 1.0] = 0.0
    return y


def torus_displacement(a, b):
    """Minimal-image difference ``a - b`` with components in [-1/2, 1/2).

    Half-period ties resolve to -1/2.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1:] != b.shape[-1:]:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return minimal_image(a - b)


def minimal_image(d):
    """Map raw differences onto [-1/2, 1/2) componentwise."""
    d = np.asarray(d, dtype=float)
    return d - np.floor(d + 0.5)


def grid_points(n, dim):
    """Node coordinates of the uniform grid, shape ``(n,)*dim + (dim,)``."""
    x = np.arange(n) / n
    mesh = np.meshgrid(*([x] * dim), indexing="ij")
    return np.stack(mesh, axis=-1)


def grid_displacements(n, dim):
    """Minimal-image displacement of every node from the origin."""
    return minimal_image(grid_points(n, dim))


def wavenumbers(n, dim):
    """Integer mode vectors in FFT order, shape ``(dim,) + (n,)*dim``."""
    k = np.fft.fftfreq(n, d=1.0 / n)
    return np.stack(np.meshgrid(*([k] * dim), indexing="ij"), axis=0)


def mode_norm(n, dim):
    """Euclidean norm |k| of every mode in FFT order."""
    return np.sqrt(np.sum(wavenumbers(n, dim) ** 2, axis=0))


@dataclass(frozen=True)
class GridField:
    """Real periodic scalar field sampled on a uniform grid.

    Attributes
    ----------
    values : ndarray
        Array of shape ``(n,)*dim``.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim not in (1, 2, 3):
            raise ValueError("GridField supports dim 1, 2 or 3")
        if len(set(v.shape)) != 1 or v.shape[0] % 2:
            raise ValueError(f"GridField needs an even cubic grid, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("GridField values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self):
        return self.values.ndim

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def h(self):
        return 1.0 / self.n

    def mean(self):
        """Trapezoidal quadrature of the field over the torus."""
        return float(np.mean(self.values))


@dataclass(frozen=True)
class SpectralCoeffs:
    """Fourier coefficients of a real field, stored in FFT order."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if len(set(c.shape)) != 1 or c.shape[0] % 2:
            raise ValueError(f"SpectralCoeffs needs an even cubic array, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def dim(self):
        return self.coeffs.ndim

    @property
    def n(self):
        return self.coeffs.shape[0]

    def at(self, k):
        """Coefficient at the integer mode vector ``k``."""
        k = np.atleast_1d(k)
        idx = tuple(int(ki) % self.n for ki in k)
        return self.coeffs[idx]

    def hermitian_defect(self):
        """Max |c_{-k} - conj(c_k)| over modes with -k representable."""
        c = self.coeffs
        flipped = c
        for ax in range(c.ndim):
            flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
        return float(np.max(np.abs(flipped - np.conj(c))))


def forward_transform(f):
    """Grid values to Fourier coefficients (``fft / n^d``)."""
    if not isinstance(f, GridField):
        f = GridField(f)
    return SpectralCoeffs(np.fft.fftn(f.values) / f.values.size)


def inverse_transform(c):
    """Fourier coefficients to real grid values."""
    if not isinstance(c, SpectralCoeffs):
        c = SpectralCoeffs(c)
    return GridField(np.real(np.fft.ifftn(c.coeffs) * c.coeffs.size))


def empirical_fourier(points, n):
    """Fourier coefficients of the empirical measure of ``points``.

    Parameters
    ----------
    points : array_like, shape (N, d) or (N,)
        Particle positions.
    n : int
        Modes with components in [-n/2, n/2) are returned.

    Returns
    -------
    SpectralCoeffs
        ``(1/N) sum_j exp(-2 pi i k . x_j)`` in FFT order.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise ValueError("empirical_fourier: empty point set")
    dim = x.shape[1]
    k = np.fft.fftfreq(n, d=1.0 / n)
    # separable product of per-axis phases
    phases = [np.exp(-2j * np.pi * np.outer(x[:, a], k)) for a in range(dim)]
    if dim == 1:
        out = phases[0].mean(axis=0)
    elif dim == 2:
        out = np.einsum("ja,jb->ab", phases[0], phases[1]) / x.shape[0]
    else:
        out = np.einsum("ja,jb,jc->abc", *phases) / x.shape[0]
    return SpectralCoeffs(out)


def spectral_gradient(values):
    """Spectral gradient of a periodic grid array, shape ``(dim,) + shape``."""
    values = np.asarray(values, dtype=float)
    n, dim = values.shape[0], values.ndim
    fh = np.fft.fftn(values)
    k = wavenumbers(n, dim)
    if n % 2 == 0:
        # drop the unpaired Nyquist mode so derivatives stay real
        k = np.where(np.abs(k) == n // 2, 0.0, k)
    return np.real(np.fft.ifftn(2j * np.pi * k * fh, axes=range(1, dim + 1)))


def evaluate_series(coeffs, x):
    """Evaluate a trigonometric polynomial at arbitrary points.

    Parameters
    ----------
    coeffs : ndarray
        Coefficients in FFT order, shape ``(n,)*dim``.
    x : ndarray, shape (M, dim)
        Evaluation points.

    Returns
    -------
    ndarray, shape (M,)
    """
    c = np.asarray(coeffs)
    n, dim = c.shape[0], c.ndim
    x = np.asarray(x, dtype=float).reshape(-1, dim)
    k = np.fft.fftfreq(n, d=1.0 / n)
    e = [np.exp(2j * np.pi * np.outer(x[:, a], k)) for a in range(dim)]
    if dim == 1:
        out = e[0] @ c
    else:
        out = np.einsum("ma,ab,mb->m", e[0], c, e[1])
    return np.real(out)
