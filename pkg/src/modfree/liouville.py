"""Grid solver for the N-particle Liouville equation

    d/dt rho_N + sum_i div_i(rho_N b_i) = sigma sum_i Lap_i rho_N,
    b_i(x) = (1/N) sum_{j != i} K(x_i - x_j),

on the product torus of dimension N (particles on the circle, N = 2 or 3).
The scheme is the one used for the mean-field equation: exact diffusion
through an integrating factor, dealiased pseudo-spectral transport and a
Lawson RK4 step.
"""

import logging
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .pde import FLOOR, NEG_TOL, PdeAbort, lawson_rk4
from .torus import check_grid_size

log = logging.getLogger(__name__)

MAX_POINTS = 64 ** 3


def kernel_tables(kernel, m):
    """Band-limited ``V`` and ``K = -V'`` sampled at the m grid offsets ``l/m``."""
    if kernel.dim != 1:
        raise ValueError("the Liouville solver works with particles on the circle (d = 1)")
    c = kernel.coefficients(m)
    k = np.fft.fftfreq(m, d=1.0 / m)
    v = np.real(np.fft.ifft(c)) * m
    force = -np.real(np.fft.ifft(2j * np.pi * k * c)) * m
    return v, force


class ProductGrid:
    """Index bookkeeping and pair tables on the ``m^N`` grid."""

    def __init__(self, N, m, kernel):
        if N < 2:
            raise ValueError("need at least two particles")
        check_grid_size(m)
        if m ** N > MAX_POINTS and not (N == 2 and m <= 512):
            raise MemoryError(f"{m}^{N} grid exceeds the memory guard")
        self.N, self.m = N, m
        self.kernel = kernel
        self.v, self.force = kernel_tables(kernel, m)
        self.idx = np.indices((m,) * N, sparse=True)

    def _pair(self, table, i, j):
        return table[(self.idx[i] - self.idx[j]) % self.m]

    @cached_property
    def pair_sum(self):
        """``sum_{i != j} V(x_i - x_j)`` on the grid."""
        out = np.zeros((self.m,) * self.N)
        for i in range(self.N):
            for j in range(self.N):
                if i != j:
                    out = out + self._pair(self.v, i, j)
        return out

    @cached_property
    def drift(self):
        """List of ``b_i`` arrays."""
        out = []
        for i in range(self.N):
            b = np.zeros((self.m,) * self.N)
            for j in range(self.N):
                if j != i:
                    b = b + self._pair(self.force, i, j)
            out.append(b / self.N)
        return out

    def pair_force(self, i, j):
        return self._pair(self.force, i, j)

    def one_body(self, f, i):
        """Broadcast a 1D grid function of ``x_i`` to the product grid."""
        shape = [1] * self.N
        shape[i] = self.m
        return np.asarray(f).reshape(shape)


class _Operator:
    def __init__(self, grid, sigma):
        N, m = grid.N, grid.m
        self.grid = grid
        k = np.fft.fftfreq(m, d=1.0 / m)
        self.ik = [2j * np.pi * grid.one_body(k, i) for i in range(N)]
        lap = np.zeros((1,) * N)
        mask = np.ones((1,) * N, dtype=bool)
        for i in range(N):
            lap = lap - (2 * np.pi * grid.one_body(k, i)) ** 2
            mask = mask & (np.abs(grid.one_body(k, i)) <= m // 3)
        self.lap = lap
        self.mask = mask
        self.drift = grid.drift
        self.size = m ** N
        self.zero = not any(np.any(b) for b in self.drift)
        self.umax = max(float(np.max(np.abs(b))) for b in self.drift)

    def transport(self, rhat):
        if self.zero:
            return np.zeros_like(rhat)
        rho = np.real(np.fft.ifftn(rhat * self.mask))
        out = np.zeros_like(rhat)
        for ik, b in zip(self.ik, self.drift):
            out -= ik * np.fft.fftn(rho * b)
        return out * self.mask


@dataclass
class LiouvilleState:
    """Joint density of N particles on an ``m^N`` grid.

    ``mass0`` records the mass of the initial data before normalization.
    """

    rho: np.ndarray
    t: float
    sigma: float
    kernel: object
    grid: ProductGrid
    mass0: float = 1.0
    floor_events: int = 0
    steps: int = 0

    @property
    def N(self):
        return self.grid.N

    @property
    def m(self):
        return self.grid.m

    def mass(self):
        return float(self.rho.mean())


def make_liouville_state(rho, sigma, kernel, allow_singular=False):
    """Wrap an initial joint density; it is normalized to unit mass.

    Singular kernels are rejected unless ``allow_singular`` is set, in which
    case the drift uses the series truncated at the grid size.
    """
    rho = np.array(rho, dtype=float)
    if kernel.meta is not None and kernel.meta.singular and not allow_singular:
        raise ValueError("singular kernel in the Liouville solver; pass a regularized "
                         "kernel or set allow_singular")
    N, m = rho.ndim, rho.shape[0]
    if any(s != m for s in rho.shape):
        raise ValueError("joint density must live on a cubic grid")
    est = 12 * m ** N * 16
    log.info("Liouville grid %d^%d, about %.1f MB of work arrays", m, N, est / 2 ** 20)
    grid = ProductGrid(N, m, kernel)
    if np.any(rho < 0) or not np.all(np.isfinite(rho)):
        raise ValueError("joint density must be finite and nonnegative")
    mass = rho.mean()
    return LiouvilleState(rho / mass, 0.0, float(sigma), kernel, grid, float(mass))


def product_state(rho_bar, N, sigma, kernel, allow_singular=False):
    """Tensorized initial data ``rho_bar^{(x) N}``."""
    rho_bar = np.asarray(getattr(rho_bar, "values", rho_bar), dtype=float)
    return make_liouville_state(_tensor(rho_bar / rho_bar.mean(), N), sigma, kernel,
                                allow_singular)


_OPS = {}


def _operator(state):
    key = (id(state.grid), state.sigma)
    op = _OPS.get(key)
    if op is None:
        if len(_OPS) > 8:
            _OPS.clear()
        op = _OPS[key] = _Operator(state.grid, state.sigma)
    return op


def advance_liouville(state, dt):
    """Advance by ``dt`` with CFL halving ``dt <= h / (2 max|b|)``."""
    op = _operator(state)
    limit = np.inf if op.umax == 0 else 1.0 / (state.m * 2.0 * op.umax)
    sub = 1
    while dt / sub > limit:
        sub *= 2
    for _ in range(sub):
        state = _step(state, dt / sub, op)
    return state


def _step(state, dt, op):
    half = np.exp(0.5 * dt * state.sigma * op.lap)
    rhat = np.fft.fftn(state.rho)
    new_hat = lawson_rk4(rhat, op.transport, half, dt)
    new_hat.flat[0] = rhat.flat[0]
    rho = np.real(np.fft.ifftn(new_hat))
    if not np.all(np.isfinite(rho)):
        raise PdeAbort("non-finite joint density", state)
    floor_events = state.floor_events
    low = rho.min()
    if low < -NEG_TOL:
        raise PdeAbort(f"joint density went negative ({low:.3g})", state)
    if low < 0:
        mass = rho.mean()
        rho = np.maximum(rho, FLOOR)
        rho *= mass / rho.mean()
        floor_events += 1
        log.warning("positivity floor applied at t=%.6g", state.t + dt)
    return replace(state, rho=rho, t=state.t + dt, floor_events=floor_events,
                   steps=state.steps + 1)


def gibbs_density(kernel, sigma, N, m):
    """Normalized ``exp(-(1/(2 N sigma)) sum_{i != j} V(x_i - x_j))`` on the grid."""
    if not sigma > 0:
        raise ValueError("Gibbs density needs sigma > 0")
    grid = ProductGrid(N, m, kernel)
    logg = -grid.pair_sum / (2.0 * N * sigma)
    g = np.exp(logg - logg.max())
    return g / g.mean()


def marginal(state, k):
    """Rank-k marginal: integrate out the trailing ``N - k`` coordinates."""
    rho = state.rho if isinstance(state, LiouvilleState) else np.asarray(state)
    N = rho.ndim
    if not 1 <= k <= N:
        raise ValueError(f"marginal rank must be in 1..{N}, got {k}")
    if k == N:
        return rho.copy()
    return rho.mean(axis=tuple(range(k, N)))


def _xlogy_ratio(p, q):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0) / q), 0.0)


def _tensor(rho_bar, k):
    out = np.ones((1,) * k)
    for i in range(k):
        shape = [1] * k
        shape[i] = rho_bar.shape[0]
        out = out * rho_bar.reshape(shape)
    return out


def relative_entropy(state, ref):
    """``(1/N) int rho_N log(rho_N / prod rho_bar(x_i))`` with ``0 log 0 = 0``."""
    rho = state.rho if isinstance(state, LiouvilleState) else np.asarray(state, dtype=float)
    ref = np.asarray(getattr(ref, "values", ref), dtype=float)
    if np.any(ref <= 0):
        raise ValueError("reference density must be strictly positive")
    N = rho.ndim
    return float(np.mean(_xlogy_ratio(rho, _tensor(ref, N)))) / N


@dataclass(frozen=True)
class CkpResult:
    """Both sides of the rank-k Pinsker bound and of marginal subadditivity.

    ``l1_sq <= 2 k H_N`` and ``(1/k) H(rho_{N,k} | rho_bar^k) <= H_N``.
    """

    k: int
    l1_sq: float
    pinsker_rhs: float
    marginal_entropy: float
    entropy: float

    @property
    def pinsker_slack(self):
        return self.pinsker_rhs - self.l1_sq

    @property
    def subadditivity_slack(self):
        return self.entropy - self.marginal_entropy


def ckp_check(state, ref, k=1):
    rho = state.rho if isinstance(state, LiouvilleState) else np.asarray(state, dtype=float)
    ref = np.asarray(getattr(ref, "values", ref), dtype=float)
    h_n = relative_entropy(rho, ref)
    mk = marginal(rho, k)
    tens = _tensor(ref, k)
    l1 = float(np.mean(np.abs(mk - tens)))
    h_k = relative_entropy(mk, ref)
    return CkpResult(k, l1 * l1, 2.0 * k * h_n, h_k, h_n)


def run_liouville(state, T, dt, stride=1):
    steps = int(round(T / dt))
    out = [state]
    for i in range(steps):
        state = advance_liouville(state, dt)
        if (i + 1) % stride == 0:
            out.append(state)
    return out
