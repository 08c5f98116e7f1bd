"""Convergence-rate sweeps in the particle number N.

For each N an ensemble is simulated to time T, the rank-1 marginal is
estimated from the pooled particles and compared with the mean-field
density at T.  The distance is fitted as ``C N^(-theta)`` by least squares
in log-log coordinates.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .diagnostics import DiagnosticsRecord, ensemble_record
from .diagnostics.wasserstein import wasserstein1
from .kernels import kernel_from_label
from .particles import SimConfig, run
from .pde import make_state, run_pde
from .profiles import density_profile
from .regularizer import mollifier_hat
from .torus import check_grid_size, mode_norm

log = logging.getLogger(__name__)

DISTANCES = ("l1", "w1")


@dataclass(frozen=True)
class ExperimentPlan:
    """A sweep over particle numbers with everything else fixed.

    ``distance`` is ``"l1"`` (smoothed L1 of the rank-1 marginal, fixed
    sigma) or ``"w1"`` (Wasserstein-1, intended for vanishing sigma with
    ``beta > 0``).  ``grid`` is the histogram and mean-field grid.
    """

    N_list: tuple
    kernel: str = "periodic-log"
    kernel_n: int = 4096
    sigma: float = 0.5
    beta: float = 0.0
    dt: float = 1e-3
    T: float = 0.1
    R: int = 100
    seed: int = 0
    init: str = "cosine:0.5"
    grid: int = 64
    dim: int = 1
    distance: str = "l1"
    allow_capped: bool = False
    r_min: float = None
    eta: float = 0.25
    delta: float = 1.0 / 32
    configs: tuple = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        Ns = tuple(int(n) for n in self.N_list)
        if len(Ns) < 3:
            raise ValueError("a rate fit needs at least three values of N")
        if len(set(Ns)) != len(Ns):
            raise ValueError("N values must be distinct")
        if self.distance not in DISTANCES:
            raise ValueError(f"distance must be one of {DISTANCES}")
        check_grid_size(self.grid)
        object.__setattr__(self, "N_list", Ns)
        kernel = kernel_from_label(self.kernel, self.kernel_n, self.dim)
        density_profile(self.init, self.grid, self.dim)
        sigma_mode = "vanishing" if self.beta > 0 else "fixed"
        # resolve and validate every sweep point before anything runs
        cfgs = tuple(SimConfig(N=N, kernel=kernel, sigma=self.sigma, beta=self.beta,
                               dt=self.dt, T=self.T, R=self.R, seed=self.seed + i,
                               d=self.dim, init=self.init, stride=max(1, round(self.T / self.dt)),
                               r_min=self.r_min, allow_capped=self.allow_capped,
                               sigma_mode=sigma_mode)
                     for i, N in enumerate(Ns))
        object.__setattr__(self, "configs", cfgs)

    @property
    def kernel_spec(self):
        return self.configs[0].kernel


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of ``log distance = a - theta log N``."""

    N: tuple
    distance: tuple
    theta: float
    intercept: float
    r2: float
    ci_low: float
    ci_high: float
    warning: bool

    def as_dict(self):
        return {"theta": self.theta, "intercept": self.intercept, "r2": self.r2,
                "ci_low": self.ci_low, "ci_high": self.ci_high, "warning": self.warning,
                "N": list(self.N), "distance": list(self.distance)}


def fit_rate(N, dist, level=0.95):
    """Fit ``dist ~ C N^(-theta)``; the interval is the t-interval on the slope.

    A fit with ``R^2 < 0.5`` is returned with ``warning`` set.
    """
    N = np.asarray(N, dtype=float)
    dist = np.asarray(dist, dtype=float)
    if N.size < 3:
        raise ValueError("a rate fit needs at least three points")
    if np.any(dist <= 0):
        raise ValueError("distances must be positive for a log-log fit")
    res = stats.linregress(np.log(N), np.log(dist))
    q = stats.t.ppf(0.5 + level / 2, N.size - 2)
    theta = -res.slope
    r2 = res.rvalue ** 2
    warn = bool(r2 < 0.5)
    if warn:
        log.warning("noisy rate fit: R^2 = %.3f", r2)
    return RateFit(tuple(int(n) for n in N), tuple(float(d) for d in dist), float(theta),
                   float(res.intercept), float(r2), float(theta - q * res.stderr),
                   float(theta + q * res.stderr), warn)


def smooth_density(values, bandwidth):
    """Convolve a grid density with the mollifier scaled to ``bandwidth``."""
    v = np.asarray(values, dtype=float)
    n, dim = v.shape[0], v.ndim
    c = np.fft.fftn(v) * mollifier_hat(bandwidth * mode_norm(n, dim), dim)
    return np.real(np.fft.ifftn(c))


def histogram_density(positions, n):
    """Histogram density of points on the n-grid, cells centred on the nodes."""
    pts = np.asarray(positions, dtype=float)
    dim = pts.shape[-1]
    pts = pts.reshape(-1, dim)
    idx = np.floor(np.mod(pts + 0.5 / n, 1.0) * n).astype(np.int64) % n
    flat = np.ravel_multi_index(tuple(idx.T), (n,) * dim)
    counts = np.bincount(flat, minlength=n ** dim).reshape((n,) * dim)
    return counts * (n ** dim / pts.shape[0])


def marginal_estimate(positions, n):
    """Rank-1 marginal: histogram followed by one mollification at bandwidth 2h."""
    return smooth_density(histogram_density(positions, n), 2.0 / n)


def smoothed_l1(positions, rho, n=None):
    """L1 distance between the smoothed marginal and the equally smoothed ``rho``."""
    rho = np.asarray(rho, dtype=float)
    n = rho.shape[0] if n is None else n
    return float(np.mean(np.abs(marginal_estimate(positions, n) - smooth_density(rho, 2.0 / n))))


def reference_density(plan):
    """Mean-field density at T on the plan grid (solved once per sweep).

    Vanishing-sigma sweeps compare with the inviscid equation.
    """
    rho0 = density_profile(plan.init, plan.grid, plan.dim)
    sigma = 0.0 if plan.beta > 0 else plan.sigma
    state = make_state(rho0, sigma, plan.kernel_spec)
    return run_pde(state, plan.T, plan.dt, stride=max(1, round(plan.T / plan.dt)))[-1].rho.values


@dataclass
class SweepPoint:
    N: int
    distance: float
    replicas: int
    excluded: int
    cap_events: int
    record: DiagnosticsRecord

    def row(self):
        return {"N": self.N, "distance": self.distance, "replicas": self.replicas,
                "excluded": self.excluded, "cap_events": self.cap_events,
                **{k: v for k, v in self.record.as_dict().items()}}


def _run_point(args):
    plan, config, rho_T = args
    snaps = run(config)
    last = snaps[-1]
    keep = np.ones(last.positions.shape[0], dtype=bool)
    if not config.allow_capped:
        keep &= last.cap_events == 0
    # replicas that aborted stop moving; their cap count is irrelevant
    keep &= np.all(np.isfinite(last.positions.reshape(len(keep), -1)), axis=1)
    if not np.any(keep):
        raise RuntimeError(f"N={config.N}: every replica was excluded")
    pos = last.positions[keep]
    if plan.distance == "l1":
        dist = smoothed_l1(pos, rho_T)
    else:
        dist = wasserstein1(pos.reshape(-1, plan.dim), rho_T, plan.dim)
    snap = replace(last, positions=pos, min_dist=last.min_dist[keep])
    rec = ensemble_record(snap, rho_T, config.kernel, config.sigma_N, eta=plan.eta,
                          delta=plan.delta, seed=config.seed,
                          w1_reference=rho_T if plan.dim == 1 else None)
    return SweepPoint(config.N, dist, int(keep.sum()), int((~keep).sum()),
                      int(last.cap_events.sum()), rec)


def run_rate_sweep(plan, workers=1):
    """Run every sweep point and fit the rate.

    Returns
    -------
    fit : RateFit
    points : list of SweepPoint
    """
    rho_T = reference_density(plan)
    jobs = [(plan, c, rho_T) for c in plan.configs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            points = list(ex.map(_run_point, jobs))
    else:
        points = [_run_point(j) for j in jobs]
    fit = fit_rate([p.N for p in points], [p.distance for p in points])
    return fit, points
