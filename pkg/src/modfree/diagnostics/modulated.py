"""Modulated free energy of a grid joint density and its dissipation balance.

For a joint density ``rho_N`` on the product grid and a one-particle
density ``rho_bar`` these routines evaluate, by quadrature,

    H_N = (1/N) int rho_N log(rho_N / rho_bar^N)
    K_N = (1/(2 sigma)) int rho_N [ (1/N^2) sum_{i!=j} V(x_i - x_j)
                                   - (2/N) sum_i V*rho_bar(x_i) + int V*rho_bar rho_bar ]
    D   = (sigma/N) int rho_N sum_i |grad_i log(rho_N / rho_bar_N) - grad_i log(G_N / G_bar)|^2
    I_N = -(1/2) int int_{x != y} grad V(x - y) . (phi(x) - phi(y)) (d mu_N - d rho_bar)^2 d rho_N

with ``phi = grad log(rho_bar / G_bar) = (log rho_bar)' + (V*rho_bar)'/sigma``.
When ``rho_N`` solves the Liouville equation and ``rho_bar`` the mean-field
equation, ``E_N = H_N + K_N`` obeys ``dE_N/dt = -D + I_N``.
"""

from dataclasses import dataclass

import numpy as np

from ..liouville import LiouvilleState, ProductGrid, advance_liouville, relative_entropy
from ..pde import advance, make_state, potential_field
from ..torus import spectral_gradient


class MeanFieldTerms:
    """One-particle fields derived from ``rho_bar`` used by every functional."""

    def __init__(self, rho_bar, kernel, sigma):
        rho_bar = np.asarray(getattr(rho_bar, "values", rho_bar), dtype=float)
        if np.any(rho_bar <= 0):
            raise ValueError("mean-field density must be strictly positive")
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.rho = rho_bar
        self.sigma = sigma
        self.pot = potential_field(rho_bar, kernel)
        self.dpot = spectral_gradient(self.pot)[0]
        self.dlog = spectral_gradient(rho_bar)[0] / rho_bar
        self.phi = self.dlog + self.dpot / sigma
        self.dpot_phi = spectral_gradient(potential_field(self.phi * rho_bar, kernel))[0]
        self.self_energy = float(np.mean(self.pot * rho_bar))
        self.phi_term = float(np.mean(self.phi * rho_bar * self.dpot))


def _grid(state_or_rho, kernel):
    if isinstance(state_or_rho, LiouvilleState):
        return state_or_rho.rho, state_or_rho.grid
    rho = np.asarray(state_or_rho, dtype=float)
    return rho, ProductGrid(rho.ndim, rho.shape[0], kernel)


def _one_body_sum(grid, f):
    out = 0.0
    for i in range(grid.N):
        out = out + grid.one_body(f, i)
    return out


def log_gibbs_grid(grid, terms):
    """``log G_N`` and ``log G_bar`` on the product grid."""
    N, s = grid.N, terms.sigma
    log_gn = -grid.pair_sum / (2.0 * N * s)
    log_gbar = -_one_body_sum(grid, terms.pot) / s + N * terms.self_energy / (2.0 * s)
    return log_gn, log_gbar


def modulated_energy_grid(rho, grid, terms):
    N = grid.N
    integrand = (grid.pair_sum / N ** 2 - 2.0 / N * _one_body_sum(grid, terms.pot)
                 + terms.self_energy)
    return float(np.mean(rho * integrand)) / (2.0 * terms.sigma)


def fisher_grid(rho, grid, terms):
    N, s = grid.N, terms.sigma
    grads = spectral_gradient(rho)
    total = np.zeros_like(rho)
    for i in range(N):
        gi = (grads[i] / rho - grid.one_body(terms.dlog, i)
              - grid.drift[i] / s - grid.one_body(terms.dpot, i) / s)
        total += gi * gi
    return s / N * float(np.mean(rho * total))


def i_n_grid(rho, grid, terms):
    N = grid.N
    J = np.zeros_like(rho)
    for i in range(N):
        phi_i = grid.one_body(terms.phi, i)
        for j in range(N):
            if j != i:
                # grad V = -K
                J += grid.pair_force(i, j) * phi_i / N ** 2
        J += (phi_i * grid.one_body(terms.dpot, i) - grid.one_body(terms.dpot_phi, i)) / N
    J -= terms.phi_term
    return float(np.mean(rho * J))


def fisher_dissipation(state, rho_bar, kernel, sigma):
    """Modulated Fisher information ``D`` of a grid joint density."""
    rho, grid = _grid(state, kernel)
    if np.any(rho <= 0):
        raise ValueError("Fisher term needs a strictly positive joint density")
    return fisher_grid(rho, grid, MeanFieldTerms(rho_bar, kernel, sigma))


def modulated_energy_state(state, rho_bar, kernel, sigma):
    rho, grid = _grid(state, kernel)
    return modulated_energy_grid(rho, grid, MeanFieldTerms(rho_bar, kernel, sigma))


def i_n_state(state, rho_bar, kernel, sigma):
    rho, grid = _grid(state, kernel)
    return i_n_grid(rho, grid, MeanFieldTerms(rho_bar, kernel, sigma))


@dataclass
class MasterSeries:
    """Time series of the free-energy balance on a shared time grid.

    ``lhs = E_N(t) + int_0^t D`` and ``rhs = E_N(0) + int_0^t I_N``.
    """

    t: np.ndarray
    H: np.ndarray
    K: np.ndarray
    E: np.ndarray
    D: np.ndarray
    I: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def slack(self):
        return self.rhs - self.lhs

    @property
    def tol(self):
        """Largest discrepancy between the two sides (the balance is an identity)."""
        return float(np.max(np.abs(self.lhs - self.rhs)))

    def rows(self):
        for k in range(len(self.t)):
            yield {"t": self.t[k], "H_N": self.H[k], "K_N": self.K[k], "E_N": self.E[k],
                   "fisher_D": self.D[k], "I_N": self.I[k], "lhs": self.lhs[k],
                   "rhs": self.rhs[k], "slack": self.rhs[k] - self.lhs[k]}


def master_inequality_check(state, rho_bar, T, dt, stride=1):
    """Evolve the joint and mean-field densities together and record the balance.

    Parameters
    ----------
    state : LiouvilleState
        Initial joint density; its kernel and sigma drive both equations.
    rho_bar : array_like
        Initial one-particle density on the same m-grid.
    T, dt : float
    stride : int
        Output every ``stride`` steps; the time integrals use every step.

    Returns
    -------
    MasterSeries
    """
    kernel, sigma = state.kernel, state.sigma
    pde_state = make_state(rho_bar, sigma, kernel)
    if pde_state.n != state.m:
        raise ValueError("mean-field grid must match the Liouville grid")
    steps = int(round(T / dt))

    def measure(st, ps):
        terms = MeanFieldTerms(ps.rho.values, kernel, sigma)
        h = relative_entropy(st.rho, ps.rho.values)
        k = modulated_energy_grid(st.rho, st.grid, terms)
        return h, k, fisher_grid(st.rho, st.grid, terms), i_n_grid(st.rho, st.grid, terms)

    h, k, d, i_n = measure(state, pde_state)
    e0 = h + k
    int_d = int_i = 0.0
    rec = [(0.0, h, k, d, i_n, e0, e0)]
    for s in range(1, steps + 1):
        state = advance_liouville(state, dt)
        pde_state = advance(pde_state, dt)
        h, k, d_new, i_new = measure(state, pde_state)
        int_d += 0.5 * dt * (d + d_new)
        int_i += 0.5 * dt * (i_n + i_new)
        d, i_n = d_new, i_new
        if s % stride == 0 or s == steps:
            rec.append((s * dt, h, k, d, i_n, h + k + int_d, e0 + int_i))
    a = np.array(rec)
    return MasterSeries(a[:, 0], a[:, 1], a[:, 2], a[:, 1] + a[:, 2], a[:, 3], a[:, 4],
                        a[:, 5], a[:, 6])
