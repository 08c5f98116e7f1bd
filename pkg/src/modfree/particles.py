"""Ensembles of interacting particles on the torus.

Each replica evolves

    X_i <- wrap(X_i + (dt/N) sum_{j != i} K(X_i - X_j) + sqrt(2 sigma dt) xi_i)

with ``K = -grad V`` summed directly over all pairs.  Gaussian increments
come from the counter-based stream of ``(seed, replica, step)``, so a
replica's trajectory does not depend on which worker computes it.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import rng
from .kernels import KernelSpec, eval_force
from .profiles import density_profile, normalize_density
from .torus import minimal_image, wrap


@dataclass(frozen=True)
class SimConfig:
    """Parameters of a particle ensemble run.

    ``sigma`` is the diffusion coefficient; with ``beta > 0`` the run uses
    the vanishing schedule ``sigma_N = sigma * N^(-beta)``.
    """

    N: int
    kernel: KernelSpec
    sigma: float = 0.5
    beta: float = 0.0
    dt: float = 1e-3
    T: float = 0.1
    R: int = 1
    seed: int = 0
    d: int = 1
    init: object = "uniform"
    stride: int = 1
    r_min: float = None
    allow_capped: bool = False
    sigma_mode: str = "fixed"
    init_grid: int = 4096

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if self.R < 1:
            raise ValueError("R must be at least 1")
        if not self.dt > 0 or self.T < self.dt * (1 - 1e-12):
            raise ValueError("need dt > 0 and T >= dt")
        if self.sigma < 0 or self.beta < 0:
            raise ValueError("sigma and beta must be nonnegative")
        if self.sigma_mode == "vanishing" and not self.beta > 0:
            raise ValueError("vanishing sigma schedule needs beta > 0")
        if self.kernel.dim != self.d:
            raise ValueError("kernel dimension does not match d")
        if self.stride < 1:
            raise ValueError("stride must be positive")

    @property
    def sigma_N(self):
        return self.sigma * self.N ** (-self.beta)

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))


@dataclass
class EnsembleState:
    """Positions of R replicas of N particles, shape ``(R, N, d)``.

    The random stream state of replica r at step s is the address
    ``(seed, r, s)``; ``step`` is the only stream counter to carry.
    """

    positions: np.ndarray
    t: float
    step: int
    seed: int
    cap_events: np.ndarray
    aborted: np.ndarray = field(default=None)
    replica_offset: int = 0

    def __post_init__(self):
        if self.aborted is None:
            self.aborted = np.zeros(self.positions.shape[0], dtype=bool)

    def copy(self):
        return EnsembleState(self.positions.copy(), self.t, self.step, self.seed,
                             self.cap_events.copy(), self.aborted.copy(),
                             self.replica_offset)


def sample_density(density, count, gen):
    """Draw iid points from a cell-wise constant grid density.

    d=1 uses the exact inverse of the piecewise-linear CDF; d=2 uses
    rejection from the uniform proposal.
    """
    rho = normalize_density(density)
    n, dim = rho.shape[0], rho.ndim
    h = 1.0 / n
    if dim == 1:
        cdf = np.concatenate([[0.0], np.cumsum(rho) * h])
        cdf /= cdf[-1]
        u = gen.random(count)
        j = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, n - 1)
        frac = (u - cdf[j]) / np.maximum(cdf[j + 1] - cdf[j], 1e-300)
        # cells are centred on the nodes
        x = (j + np.clip(frac, 0.0, 1.0) - 0.5) * h
        return wrap(x)[:, None]
    top = rho.max()
    out = np.empty((0, dim))
    while out.shape[0] < count:
        need = count - out.shape[0]
        prop = gen.random((2 * need + 16, dim))
        idx = tuple(np.floor(wrap(prop + 0.5 * h) * n).astype(int).T % n)
        keep = gen.random(prop.shape[0]) * top <= rho[idx]
        out = np.concatenate([out, prop[keep]])
    return out[:count]


def init_ensemble(config):
    """Initial positions: iid draws from the initial density or a lattice."""
    R, N, d = config.R, config.N, config.d
    pos = np.empty((R, N, d))
    init = config.init
    if isinstance(init, str) and init == "lattice":
        if d == 1:
            lat = (np.arange(N) / N)[:, None]
        else:
            side = int(round(N ** 0.5))
            if side * side != N:
                raise ValueError("2D lattice needs a square N")
            g = np.arange(side) / side
            lat = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
        pos[:] = lat
    else:
        if isinstance(init, str):
            n = config.init_grid if d == 1 else 256
            density = density_profile(init, n, d)
        else:
            density = np.asarray(init, dtype=float)
            if np.any(density < 0):
                raise ValueError("initial density has negative values")
        for r in range(R):
            gen = rng.stream(config.seed, r, 0, rng.PURPOSE_INIT)
            pos[r] = sample_density(density, N, gen)
    return EnsembleState(pos, 0.0, 0, config.seed, np.zeros(R, dtype=np.int64))


def pair_forces(x, kernel, r_min=None):
    """Mean-field drift ``(1/N) sum_{j != i} K(x_i - x_j)`` for one replica.

    Returns the drift, the number of guarded pairs and the minimum
    pairwise distance.
    """
    N, d = x.shape
    if kernel.family == "tabulated" and not np.any(kernel.spectral_table.coeffs):
        return np.zeros_like(x), 0, np.nan
    disp = minimal_image(x[:, None, :] - x[None, :, :])
    diag = np.arange(N)
    disp[diag, diag] = 0.25
    forces, _ = eval_force(kernel, disp, r_min)
    forces = forces.reshape(N, N, d)
    forces[diag, diag] = 0.0
    # enforce exact pair antisymmetry
    forces = 0.5 * (forces - forces.transpose(1, 0, 2))
    dist = np.sqrt(np.sum(disp * disp, axis=-1))
    dist[diag, diag] = np.inf
    guard = 0.5 / kernel.n if r_min is None else r_min
    # each close pair appears twice in the matrix
    n_cap = int(np.count_nonzero(dist < guard)) // 2 if kernel.meta.singular else 0
    return forces.sum(axis=1) / N, n_cap, float(dist.min())


def step_replica(x, kernel, sigma, dt, noise, r_min=None):
    """One Euler-Maruyama step for a single replica with given noise."""
    drift, n_cap, _ = pair_forces(x, kernel, r_min)
    if not np.all(np.isfinite(drift)):
        raise FloatingPointError("non-finite force")
    return wrap(x + dt * drift + np.sqrt(2.0 * sigma * dt) * noise), n_cap


def step(state, config):
    """Advance every replica by one step."""
    new = state.copy()
    s = state.step + 1
    for r in range(state.positions.shape[0]):
        if new.aborted[r]:
            continue
        noise = rng.normals(state.seed, state.replica_offset + r, s, (config.N, config.d))
        try:
            new.positions[r], nc = step_replica(state.positions[r], config.kernel,
                                                config.sigma_N, config.dt, noise, config.r_min)
        except FloatingPointError:
            new.aborted[r] = True
            continue
        new.cap_events[r] += nc
    new.step = s
    new.t = s * config.dt
    return new


@dataclass
class Snapshot:
    t: float
    step: int
    positions: np.ndarray
    min_dist: np.ndarray
    cap_events: np.ndarray


def min_distances(positions):
    out = np.empty(positions.shape[0])
    for r, x in enumerate(positions):
        disp = minimal_image(x[:, None, :] - x[None, :, :])
        dist = np.sqrt(np.sum(disp * disp, axis=-1))
        np.fill_diagonal(dist, np.inf)
        out[r] = dist.min()
    return out


def _snap(state):
    return Snapshot(state.t, state.step, state.positions.copy(),
                    min_distances(state.positions), state.cap_events.copy())


def _run_serial(config, lo=0, hi=None):
    hi = config.R if hi is None else hi
    state = init_ensemble(replace(config, R=hi))
    # replicas keep their global index, so streams match across splits
    state = EnsembleState(state.positions[lo:hi].copy(), 0.0, 0, config.seed,
                          np.zeros(hi - lo, dtype=np.int64), replica_offset=lo)
    snaps = [_snap(state)]
    for _ in range(config.n_steps):
        state = step(state, config)
        if state.step % config.stride == 0:
            snaps.append(_snap(state))
    return snaps


def _run_block(args):
    return _run_serial(*args)


def run(config, workers=1):
    """Run from t=0 to T and return snapshots at the configured stride.

    Parameters
    ----------
    config : SimConfig
    workers : int
        Replica blocks are spread over this many processes; results are
        bitwise identical for any worker count.

    Returns
    -------
    list of Snapshot
    """
    if workers <= 1 or config.R == 1:
        return _run_serial(config)
    bounds = np.linspace(0, config.R, min(workers, config.R) + 1).astype(int)
    jobs = [(config, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(_run_block, jobs))
    snaps = []
    for k in range(len(parts[0])):
        pieces = [p[k] for p in parts]
        snaps.append(Snapshot(pieces[0].t, pieces[0].step,
                              np.concatenate([q.positions for q in pieces]),
                              np.concatenate([q.min_dist for q in pieces]),
                              np.concatenate([q.cap_events for q in pieces])))
    return snaps


def blowup_monitor(snapshots, alpha=0.05):
    """Trend test on the replica-mean log minimum distance.

    Returns a dict with Kendall's tau, its p-value and ``flagged`` when the
    minimum distance decreases significantly.
    """
    t = np.array([s.t for s in snapshots])
    m = np.array([np.mean(np.log(s.min_dist)) for s in snapshots])
    tau, p = stats.kendalltau(t, m)
    return {"tau": float(tau), "p_value": float(p), "flagged": bool(tau < 0 and p < alpha),
            "min_dist_first": float(np.exp(m[0])), "min_dist_last": float(np.exp(m[-1]))}


def suggest_dt(kernel, sigma, n=None):
    """Stability heuristic ``min(h / (4 max|K|), 1 / (16 sigma n^2))`` on the kernel grid."""
    from .torus import grid_displacements
    n = kernel.n if n is None else n
    h = 1.0 / n
    r = grid_displacements(n, kernel.dim).reshape(-1, kernel.dim)
    rad = np.sqrt(np.sum(r * r, axis=1))
    f, _ = eval_force(kernel, r[rad >= 0.5 * h])
    kmax = float(np.max(np.sqrt(np.sum(f * f, axis=-1))))
    bounds = [h / (4 * kmax)] if kmax > 0 else []
    if sigma > 0:
        bounds.append(1.0 / (16 * sigma * n * n))
    return min(bounds) if bounds else 1e-3
