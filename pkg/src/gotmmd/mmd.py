"""MMD estimators and Monte-Carlo kernel expectations.

Kernels are passed either as :class:`~gotmmd.kernel.KernelParams` or as any
object with ``gram(A, B=None)`` and ``paired(A, B)`` methods, such as
:class:`~gotmmd.kernel.TwoMomentKernel`.  Sums are accumulated with
``math.fsum`` so results do not depend on summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distributions import child_seed
from .kernel import KernelParams, TwoMomentKernel

__all__ = [
    "V_STATISTIC",
    "U_STATISTIC",
    "MmdEstimate",
    "PairwiseDependence",
    "mmd2_paper",
    "mmd2_unbiased",
    "delta_hat",
    "expected_kxx_mc",
    "expected_kxy_mc",
    "pairwise_r",
]

V_STATISTIC = "paper_v_statistic"
U_STATISTIC = "unbiased_u_statistic"

# relative rounding slack tolerated before a V-statistic is declared negative
NEG_TOL = 1e-9


@dataclass(frozen=True)
class MmdEstimate:
    """Squared-MMD estimate.  ``negative`` flags a U-statistic below zero (never clamped)."""

    value: float
    estimator_kind: str
    n: int
    m: int
    negative: bool = False

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class PairwiseDependence:
    """Estimate of ``r_ij = E k(S_i, S_j) - E k(S_i, S_j')`` with its standard error."""

    i: int
    j: int
    r_hat: float
    std_err: float


def _as_kernel(kernel):
    if isinstance(kernel, KernelParams):
        return TwoMomentKernel(kernel)
    if not hasattr(kernel, "gram"):
        raise TypeError("kernel must be KernelParams or provide gram(A, B=None)")
    return kernel


def _clouds(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if B.ndim == 1:
        B = B[:, None]
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("point clouds must be non-empty")
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    return A, B


def _fsum(M) -> float:
    return math.fsum(np.asarray(M).ravel())


def mmd2_paper(A, B, kernel) -> MmdEstimate:
    """Diagonal-inclusive estimator ``mean K_AA + mean K_BB - 2 mean K_AB``.

    This is the squared RKHS distance between the two empirical mean
    embeddings, so it is nonnegative; rounding below zero within ``1e-9``
    of the kernel scale is reset to 0.
    """
    A, B = _clouds(A, B)
    k = _as_kernel(kernel)
    n, m = A.shape[0], B.shape[0]
    Kaa = k.gram(A)
    Kbb = k.gram(B)
    Kab = k.gram(A, B)
    saa, sbb, sab = _fsum(Kaa), _fsum(Kbb), _fsum(Kab)
    # both orders of (A, B) give the same three sums, so the value is symmetric
    value = math.fsum([saa / n**2, sbb / m**2, -2.0 * sab / (n * m)])
    scale = max(saa / n**2, sbb / m**2, 1e-300)
    if value < 0:
        if value < -NEG_TOL * scale:
            raise FloatingPointError(f"V-statistic is negative ({value:.3g}); kernel not PSD here")
        value = 0.0
    return MmdEstimate(value, V_STATISTIC, n, m)


def mmd2_unbiased(A, B, kernel) -> MmdEstimate:
    """U-statistic with the diagonals of ``K_AA`` and ``K_BB`` removed."""
    A, B = _clouds(A, B)
    n, m = A.shape[0], B.shape[0]
    if n < 2 or m < 2:
        raise ValueError("the unbiased estimator needs at least two points per cloud")
    k = _as_kernel(kernel)
    Kaa = k.gram(A)
    Kbb = k.gram(B)
    Kab = k.gram(A, B)
    taa = _fsum(Kaa) - _fsum(np.diag(Kaa))
    tbb = _fsum(Kbb) - _fsum(np.diag(Kbb))
    value = math.fsum([taa / (n * (n - 1)), tbb / (m * (m - 1)), -2.0 * _fsum(Kab) / (n * m)])
    return MmdEstimate(value, U_STATISTIC, n, m, negative=value < 0)


def delta_hat(A, B, kernel) -> float:
    """``(n/2)`` times the V-statistic for two clouds of equal size ``n``.

    For independent samples its mean is ``E k(X,X) - E k(X,X')``.
    """
    A, B = _clouds(A, B)
    if A.shape[0] != B.shape[0]:
        raise ValueError("delta_hat needs clouds of equal size")
    return 0.5 * A.shape[0] * mmd2_paper(A, B, kernel).value


def _mean_se(vals):
    vals = np.asarray(vals, dtype=float)
    if np.all(vals == vals[0]):
        return float(vals[0]), 0.0
    mean = math.fsum(vals) / len(vals)
    var = math.fsum((vals - mean) ** 2) / (len(vals) - 1)
    return mean, math.sqrt(var / len(vals))


def _paired(k, X, Y):
    if hasattr(k, "paired"):
        return k.paired(X, Y)
    return np.array([k.gram(x[None], y[None])[0, 0] for x, y in zip(X, Y)])


def expected_kxx_mc(sampler: Callable[[int, int], np.ndarray], kernel, n_draws: int,
                    seed: int) -> tuple[float, float]:
    """Monte-Carlo ``E k(X,X)`` and its standard error; ``sampler(n, seed)`` returns ``(n, d)``."""
    if n_draws < 2:
        raise ValueError("need at least two draws")
    k = _as_kernel(kernel)
    X = np.asarray(sampler(n_draws, seed), dtype=float)
    return _mean_se(_paired(k, X, X))


def expected_kxy_mc(sampler: Callable[[int, int], np.ndarray], kernel, n_pairs: int,
                    seed: int) -> tuple[float, float]:
    """Monte-Carlo ``E k(X,X')`` over fresh independent pairs, with standard error."""
    if n_pairs < 2:
        raise ValueError("need at least two pairs")
    k = _as_kernel(kernel)
    X = np.asarray(sampler(n_pairs, child_seed(seed, 0)), dtype=float)
    Y = np.asarray(sampler(n_pairs, child_seed(seed, 1)), dtype=float)
    return _mean_se(_paired(k, X, Y))


def pairwise_r(replicated_samples, i: int, j: int, kernel) -> PairwiseDependence:
    """Estimate ``r_ij`` from ``R`` independent replicas of a joint sample, shape ``(R, n, d)``.

    The coupled term uses ``k(S_i^r, S_j^r)``; the independent term averages
    ``k(S_i^r, S_j^r')`` over all ``r != r'``.  The standard error treats the
    per-replica differences as independent.
    """
    S = np.asarray(replicated_samples, dtype=float)
    if S.ndim != 3:
        raise ValueError("replicated samples must have shape (R, n, d)")
    R = S.shape[0]
    if R < 2:
        raise ValueError("need at least two independent replicas")
    k = _as_kernel(kernel)
    Si, Sj = S[:, i, :], S[:, j, :]
    K = k.gram(Si, Sj)
    coupled = np.diag(K)
    cross = (K.sum(axis=1) - coupled) / (R - 1)
    mean, se = _mean_se(coupled - cross)
    return PairwiseDependence(i, j, mean, se)
