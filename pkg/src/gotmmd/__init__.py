"""Two-moment kernel MMD bounds for Gaussian-smoothed optimal transport."""

__version__ = "0.1.0"

import os as _os

import numba as _numba

# prefer OpenMP over a TBB runtime that may be too old to load
if "NUMBA_THREADING_LAYER_PRIORITY" not in _os.environ:
    _numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

from .special_fns import (  # noqa: E402
    DomainError,
    central_chi_moment,
    noncentral_chi_density,
    noncentral_chi_moment,
)
from .kernel import KernelParams, TwoMomentKernel, alpha_coeff, gram, kernel_eval  # noqa: E402

__all__ = [
    "__version__",
    "DomainError",
    "central_chi_moment",
    "noncentral_chi_moment",
    "noncentral_chi_density",
    "KernelParams",
    "TwoMomentKernel",
    "alpha_coeff",
    "kernel_eval",
    "gram",
]
