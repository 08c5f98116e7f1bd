"""Named initial densities on the torus."""

import numpy as np
from scipy.special import i0

from .torus import grid_points


def density_profile(spec, n, dim=1):
    """Sample a named density on an n-grid.

    Parameters
    ----------
    spec : str
        ``uniform``, ``cosine:A`` for ``1 + A cos(2 pi x_1)``,
        ``vonmises:kappa`` for ``exp(kappa sum_a cos(2 pi x_a)) / I0(kappa)^d``
        or ``file:PATH`` for a stored field table.
    n : int
    dim : int

    Returns
    -------
    ndarray of shape ``(n,)*dim`` with unit mean.
    """
    name, _, arg = spec.partition(":")
    x = grid_points(n, dim)
    if name == "uniform":
        return np.ones((n,) * dim)
    if name == "cosine":
        a = float(arg) if arg else 0.5
        if abs(a) >= 1:
            raise ValueError("cosine amplitude must be below 1 for a positive density")
        return 1.0 + a * np.cos(2 * np.pi * x[..., 0])
    if name == "vonmises":
        kappa = float(arg) if arg else 1.0
        return np.exp(kappa * np.sum(np.cos(2 * np.pi * x), axis=-1)) / i0(kappa) ** dim
    if name == "file":
        from .tables import read_table
        _, values, _ = read_table(arg)
        if values.shape != (n,) * dim:
            raise ValueError(f"{arg}: density shape {values.shape} does not match grid {n}^{dim}")
        return normalize_density(values)
    raise ValueError(f"unknown density profile {spec!r}")


def normalize_density(values):
    v = np.asarray(values, dtype=float)
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ValueError("density must be finite and nonnegative")
    mass = v.mean()
    if mass <= 0:
        raise ValueError("density has zero mass")
    return v / mass
