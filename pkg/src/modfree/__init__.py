"""Interacting particles on the torus, their mean-field limit and modulated free-energy diagnostics."""

from .kernels import KernelSpec, build_kernel, kernel_from_label, zero_kernel
from .liouville import product_state, run_liouville
from .particles import SimConfig, run
from .pde import free_energy, make_state, run_pde
from .regularizer import build_regularized
from .sweep import ExperimentPlan, RateFit, run_rate_sweep

__version__ = "0.1.0"

__all__ = ["KernelSpec", "build_kernel", "kernel_from_label", "zero_kernel", "SimConfig", "run",
           "make_state", "run_pde", "free_energy", "product_state", "run_liouville",
           "build_regularized", "ExperimentPlan", "RateFit", "run_rate_sweep"]
