"""Pseudo-spectral solver for the aggregation-diffusion equation

    d/dt rho + div(rho u) = sigma Lap rho,      u = -grad V * rho,

on the torus in d = 1 or 2.  Diffusion is integrated exactly through an
integrating factor and transport explicitly by a fourth-order Lawson
Runge-Kutta scheme, with 2/3-rule dealiasing of the quadratic term.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from .torus import GridField, check_grid_size, wavenumbers

log = logging.getLogger(__name__)

FLOOR = 1e-12
NEG_TOL = 1e-8


class PdeAbort(RuntimeError):
    """Raised when a step fails; ``state`` is the last valid state."""

    def __init__(self, msg, state):
        super().__init__(msg)
        self.state = state


def dealias_mask(n, dim):
    k = wavenumbers(n, dim)
    return np.all(np.abs(k) <= n // 3, axis=0)


def lawson_rk4(uhat, nonlinear, half, dt):
    """One Lawson RK4 step for ``u' = L u + N(u)`` in Fourier space.

    ``half`` is ``exp(L dt / 2)`` as an array.
    """
    k1 = nonlinear(uhat)
    k2 = nonlinear(half * (uhat + 0.5 * dt * k1))
    k3 = nonlinear(half * uhat + 0.5 * dt * k2)
    full = half * half
    k4 = nonlinear(full * uhat + dt * half * k3)
    return full * uhat + dt / 6.0 * (full * k1 + 2.0 * half * (k2 + k3) + k4)


@dataclass
class PdeState:
    """Density on an n-grid at time t."""

    rho: GridField
    t: float
    sigma: float
    kernel: object
    floor_events: int = 0
    steps: int = 0

    @property
    def n(self):
        return self.rho.n

    @property
    def dim(self):
        return self.rho.dim


def make_state(rho, sigma, kernel, t=0.0):
    values = np.asarray(rho, dtype=float)
    if values.ndim != kernel.dim:
        raise ValueError("density and kernel dimensions differ")
    check_grid_size(values.shape[0])
    mass = values.mean()
    if not abs(mass - 1.0) < 1e-10:
        values = values / mass
    return PdeState(GridField(values), t, float(sigma), kernel)


class _Operator:
    """Cached spectral data for one (n, dim, kernel, sigma)."""

    def __init__(self, n, dim, kernel, sigma):
        self.n, self.dim, self.sigma = n, dim, sigma
        # holding the kernel keeps its id valid as a cache key
        self.kernel = kernel
        self.k = wavenumbers(n, dim)
        self.ik = 2j * np.pi * self.k
        self.vhat = kernel.coefficients(n)
        self.lap = -(2 * np.pi) ** 2 * np.sum(self.k ** 2, axis=0)
        self.mask = dealias_mask(n, dim)
        self.size = n ** dim
        self.zero = not np.any(self.vhat)

    def velocity_hat(self, rhat):
        return -self.ik * (self.vhat * rhat)

    def transport(self, rhat):
        """Fourier coefficients of ``-div(rho u)`` (dealiased)."""
        if self.zero:
            return np.zeros_like(rhat)
        rm = rhat * self.mask
        rho = np.real(np.fft.ifftn(rm)) * self.size
        uh = self.velocity_hat(rm)
        out = np.zeros_like(rhat)
        for a in range(self.dim):
            ua = np.real(np.fft.ifftn(uh[a])) * self.size
            flux = np.fft.fftn(rho * ua) / self.size
            out -= self.ik[a] * flux
        return out * self.mask


_OPS = {}


def _operator(state):
    key = (state.n, state.dim, id(state.kernel), state.sigma)
    op = _OPS.get(key)
    if op is None:
        if len(_OPS) > 16:
            _OPS.clear()
        op = _OPS[key] = _Operator(state.n, state.dim, state.kernel, state.sigma)
    return op


def velocity_field(rho, kernel):
    """``u = -grad V * rho`` on the grid of ``rho``, shape ``(dim,) + rho.shape``."""
    values = rho.values if isinstance(rho, GridField) else np.asarray(rho, dtype=float)
    n, dim = values.shape[0], values.ndim
    rhat = np.fft.fftn(values) / values.size
    k = wavenumbers(n, dim)
    uh = -2j * np.pi * k * (kernel.coefficients(n) * rhat)
    return np.real(np.fft.ifftn(uh, axes=range(1, dim + 1))) * values.size


def potential_field(rho, kernel):
    """``V * rho`` on the grid of ``rho``."""
    values = rho.values if isinstance(rho, GridField) else np.asarray(rho, dtype=float)
    rhat = np.fft.fftn(values) / values.size
    return np.real(np.fft.ifftn(kernel.coefficients(values.shape[0]) * rhat)) * values.size


def cfl_dt(state):
    u = velocity_field(state.rho, state.kernel)
    umax = float(np.max(np.abs(u)))
    return np.inf if umax == 0 else state.rho.h / (2.0 * umax)


def advance(state, dt):
    """Advance by ``dt``, halving internally while the CFL bound is violated."""
    limit = cfl_dt(state)
    sub = 1
    while dt / sub > limit:
        sub *= 2
        if sub > 2 ** 16:
            raise PdeAbort("CFL halving limit reached", state)
    for _ in range(sub):
        state = _step(state, dt / sub)
    return state


def _step(state, dt):
    op = _operator(state)
    half = np.exp(0.5 * dt * state.sigma * op.lap)
    rhat = np.fft.fftn(state.rho.values) / op.size
    new_hat = lawson_rk4(rhat, op.transport, half, dt)
    new_hat.flat[0] = rhat.flat[0]
    rho = np.real(np.fft.ifftn(new_hat)) * op.size
    if not np.all(np.isfinite(rho)):
        raise PdeAbort("non-finite density", state)
    floor_events = state.floor_events
    low = rho.min()
    if low < -NEG_TOL:
        raise PdeAbort(f"density went negative ({low:.3g})", state)
    if low < 0:
        mass = rho.mean()
        rho = np.maximum(rho, FLOOR)
        rho *= mass / rho.mean()
        floor_events += 1
        log.warning("positivity floor applied at t=%.6g (min %.3g)", state.t + dt, low)
    return replace(state, rho=GridField(rho), t=state.t + dt, floor_events=floor_events,
                   steps=state.steps + 1)


def run_pde(state, T, dt, stride=1):
    """Advance to time T; returns the list of states at every ``stride`` steps."""
    steps = int(round(T / dt))
    out = [state]
    for i in range(steps):
        state = advance(state, dt)
        if (i + 1) % stride == 0:
            out.append(state)
    return out


@dataclass(frozen=True)
class FreeEnergy:
    entropy: float
    interaction: float
    total: float


def free_energy(state):
    """Entropy, interaction energy and ``sigma * entropy + interaction``.

    The interaction term is ``(1/2) sum_k V_hat(k) |rho_hat(k)|^2``.
    """
    rho = state.rho.values
    if np.any(rho <= 0):
        raise ValueError("free_energy needs a strictly positive density")
    entropy = float(np.mean(rho * np.log(rho)))
    rhat = np.fft.fftn(rho) / rho.size
    inter = 0.5 * float(np.sum(state.kernel.coefficients(state.n) * np.abs(rhat) ** 2))
    return FreeEnergy(entropy, inter, state.sigma * entropy + inter)
