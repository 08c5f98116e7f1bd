"""Modulated free-energy diagnostics for particle ensembles and joint densities."""

from dataclasses import asdict, dataclass, fields

import numpy as np

from .energy import (Estimate, close_pair_energy, modulated_energy, signed_measure_energy,
                     summarize, truncated_energy, truncation_profile)
from .fourier_lemma import (ConvexityResult, FourierLemmaResult, convexity_bound,
                            fourier_lemma_check, smoothed_kernel)
from .gibbs import GibbsWeights, MeanFieldPotential, log_gibbs
from .largedev import (FixedPointDivergence, FixedPointResult, PairKernel, ZEstimate,
                       euler_lagrange_fixed_point, large_deviation_functional,
                       large_deviation_z, truncated_kernel, zero_pair_kernel)
from .modulated import (MasterSeries, MeanFieldTerms, fisher_dissipation,
                        master_inequality_check, modulated_energy_state, i_n_state)
from .wasserstein import circular_w1, sliced_w1, wasserstein1

NAN = float("nan")


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One time-indexed row of scalar observables.

    Quantities that a run cannot supply are NaN; in particular ``H_N`` and
    ``E_N`` are only filled for joint-density runs.  ``*_se`` columns hold
    Monte Carlo standard errors for ensemble rows.
    """

    t: float
    K_N: float = NAN
    K_N_eta: float = NAN
    H_N: float = NAN
    E_N: float = NAN
    fisher_D: float = NAN
    I_N: float = NAN
    close_pair: float = NAN
    min_dist: float = NAN
    W1_marginal: float = NAN
    K_N_se: float = NAN
    K_N_eta_se: float = NAN
    close_pair_se: float = NAN

    def __post_init__(self):
        if not (np.isnan(self.H_N) or np.isnan(self.K_N) or np.isnan(self.E_N)):
            if abs(self.E_N - self.H_N - self.K_N) > 1e-10 * max(1.0, abs(self.E_N)):
                raise ValueError("E_N must equal H_N + K_N")

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def as_dict(self):
        return asdict(self)


def master_records(series):
    """Records from a :class:`MasterSeries`."""
    return [DiagnosticsRecord(t=float(series.t[k]), K_N=float(series.K[k]),
                              H_N=float(series.H[k]), E_N=float(series.H[k] + series.K[k]),
                              fisher_D=float(series.D[k]), I_N=float(series.I[k]))
            for k in range(len(series.t))]


def ensemble_record(snapshot, rho_bar, kernel, sigma, eta=0.25, delta=1.0 / 32, seed=0,
                    w1_reference=None):
    """Record for one ensemble snapshot.

    ``rho_bar`` is the mean-field density at the snapshot time.  With
    ``w1_reference`` (a 1D density) the pooled rank-1 marginal is compared
    in W1; this is only done in d = 1.
    """
    pos = snapshot.positions
    k = modulated_energy(pos, rho_bar, kernel, sigma, seed=seed)
    ke = truncated_energy(pos, rho_bar, kernel, sigma, eta, seed=seed)
    cp = close_pair_energy(pos, kernel, delta, seed=seed)
    w1 = NAN
    if w1_reference is not None and pos.shape[-1] == 1:
        w1 = circular_w1(pos.reshape(-1, 1), w1_reference)
    return DiagnosticsRecord(t=float(snapshot.t), K_N=k.mean, K_N_eta=ke.mean,
                             close_pair=cp.mean, min_dist=float(np.min(snapshot.min_dist)),
                             W1_marginal=w1, K_N_se=k.se, K_N_eta_se=ke.se,
                             close_pair_se=cp.se)


__all__ = [
    "DiagnosticsRecord", "master_records", "ensemble_record",
    "Estimate", "summarize", "modulated_energy", "truncated_energy", "truncation_profile",
    "close_pair_energy", "signed_measure_energy",
    "GibbsWeights", "MeanFieldPotential", "log_gibbs",
    "MeanFieldTerms", "MasterSeries", "master_inequality_check", "fisher_dissipation",
    "modulated_energy_state", "i_n_state",
    "FourierLemmaResult", "fourier_lemma_check", "smoothed_kernel", "ConvexityResult",
    "convexity_bound",
    "PairKernel", "zero_pair_kernel", "truncated_kernel", "ZEstimate", "large_deviation_z",
    "FixedPointDivergence", "FixedPointResult", "euler_lagrange_fixed_point",
    "large_deviation_functional",
    "circular_w1", "sliced_w1", "wasserstein1",
]
