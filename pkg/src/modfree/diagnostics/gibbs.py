"""Log Gibbs weights of particle configurations."""

from dataclasses import dataclass

import numpy as np

from ..pde import potential_field
from ..torus import evaluate_series, minimal_image


def as_configuration(x, dim=1):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None] if dim == 1 else x.reshape(-1, dim)
    return x


def pair_values(x, kernel):
    """Matrix ``V(x_i - x_j)`` with a zero diagonal."""
    x = as_configuration(x, kernel.dim)
    N = x.shape[0]
    disp = minimal_image(x[:, None, :] - x[None, :, :])
    diag = np.arange(N)
    disp[diag, diag] = 0.25
    v = np.array(kernel.value(disp), dtype=float)
    v[diag, diag] = 0.0
    return v


class MeanFieldPotential:
    """``V * rho_bar`` held by its Fourier coefficients and evaluated exactly."""

    def __init__(self, rho_bar, kernel):
        rho = np.asarray(getattr(rho_bar, "values", rho_bar), dtype=float)
        if rho.ndim != kernel.dim:
            raise ValueError("density and kernel dimensions differ")
        self.rho = rho
        self.coeffs = kernel.coefficients(rho.shape[0]) * np.fft.fftn(rho) / rho.size
        self.grid = potential_field(rho, kernel)
        self.self_energy = float(np.sum(np.real(self.coeffs * np.conj(np.fft.fftn(rho) / rho.size))))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return evaluate_series(self.coeffs, x.reshape(-1, self.rho.ndim)).reshape(x.shape[:-1])


@dataclass(frozen=True)
class GibbsWeights:
    """The three ingredients of the log weights of one configuration.

    ``pair_sum = sum_{i != j} V(x_i - x_j)``, ``potential_sum = sum_i V*rho_bar(x_i)``
    and ``self_energy = int V*rho_bar rho_bar``.
    """

    N: int
    sigma: float
    pair_sum: float
    potential_sum: float
    self_energy: float

    @property
    def logGN(self):
        return -self.pair_sum / (2.0 * self.N * self.sigma)

    @property
    def logGbar(self):
        return (-self.potential_sum / self.sigma
                + self.N * self.self_energy / (2.0 * self.sigma))


def log_gibbs(x, kernel, rho_bar, sigma, potential=None):
    """Log Gibbs weights of configuration ``x``.

    Parameters
    ----------
    x : array_like, shape (N, d)
    kernel : KernelSpec
    rho_bar : array_like or GridField
        Strictly positive mean-field density.
    sigma : float
        Must be positive; the weights scale like ``1/sigma``.
    potential : MeanFieldPotential, optional
        Reused when evaluating many configurations.

    Returns
    -------
    GibbsWeights
    """
    if not sigma > 0:
        raise ValueError("Gibbs weights need sigma > 0")
    x = as_configuration(x, kernel.dim)
    pot = MeanFieldPotential(rho_bar, kernel) if potential is None else potential
    if np.any(pot.rho <= 0):
        raise ValueError("mean-field density must be strictly positive")
    return GibbsWeights(x.shape[0], float(sigma), float(pair_values(x, kernel).sum()),
                        float(pot(x).sum()), pot.self_energy)
