"""Seeded samplers and exact moment formulas.

Every sampler is a pure function of its parameters and an integer seed.
Independent streams for replicas are derived with :func:`child_seed`, so
results never depend on the order in which replicas are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .special_fns import DomainError, log_central_chi_moment

__all__ = [
    "GOLDEN_GAMMA",
    "mix64",
    "child_seed",
    "make_rng",
    "SubGammaSpec",
    "DependentDesign",
    "sample_gaussian",
    "gamma_sample",
    "sample_subgamma_example1",
    "smooth",
    "sample_unit_sphere",
    "sample_dependent_gp",
    "log_example1_exact_moment",
    "example1_exact_moment",
    "example1_log_mgf",
    "subgamma_log_mgf_envelope",
]

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """64-bit finalizer: three xor-shift rounds separated by two odd multiplies."""
    z &= MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & MASK64
    z ^= z >> 31
    return z


def child_seed(master: int, index: int) -> int:
    """``mix64(master XOR (index * 0x9E3779B97F4A7C15))``, reduced mod 2^64.

    ``mix64`` is a bijection, so distinct indices always give distinct children.
    """
    if master < 0 or index < 0:
        raise ValueError("seeds and stream indices must be nonnegative")
    return mix64((master & MASK64) ^ ((index * GOLDEN_GAMMA) & MASK64))


def make_rng(seed: int, index: int | None = None) -> np.random.Generator:
    """Counter-based Philox generator keyed by ``seed`` (or by its child ``index``)."""
    if isinstance(seed, np.random.Generator):
        return seed
    seed = int(seed)
    key = child_seed(seed, index) if index is not None else seed & MASK64
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SubGammaSpec:
    """Sub-gamma parameters ``(v, b)``: ``log E exp(a.(X - EX)) <= v|a|^2 / (2 (1 - b|a|))``.

    ``example1=True`` marks the scale-mixture family ``X = sqrt(U) Z``, which is
    sub-gamma with parameters ``(1, b)``.
    """

    v: float
    b: float
    example1: bool = False

    def __post_init__(self):
        if not self.v > 0:
            raise DomainError(f"v must be positive, got {self.v!r}")
        if not self.b >= 0:
            raise DomainError(f"b must be nonnegative, got {self.b!r}")
        if self.example1 and self.v != 1:
            raise DomainError("the scale-mixture family has v = 1")

    def sampler(self, d: int) -> Callable[[int, int], np.ndarray]:
        """``(n, seed) -> (n, d)`` sampler; only available for the scale-mixture family."""
        if not self.example1:
            raise ValueError("no generative form attached to this sub-gamma spec")
        return lambda n, seed: sample_subgamma_example1(n, d, self.b, seed)


@dataclass(frozen=True)
class DependentDesign:
    """Unit vectors ``alphas`` (n x N) indexing a Gaussian process with cov ``<a, b> I_d``."""

    alphas: np.ndarray
    transform: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float)
        if a.ndim != 2:
            raise ValueError("alphas must be an (n, N) array")
        if not np.allclose(np.linalg.norm(a, axis=1), 1.0, rtol=0.0, atol=1e-12):
            raise ValueError("every alpha must have unit norm (within 1e-12)")
        object.__setattr__(self, "alphas", a)

    @property
    def n(self) -> int:
        return self.alphas.shape[0]

    @property
    def N(self) -> int:
        return self.alphas.shape[1]


def sample_gaussian(n: int, d: int, seed: int) -> np.ndarray:
    """``n`` iid draws from ``N(0, I_d)``."""
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    return make_rng(seed).standard_normal((n, d))


def gamma_sample(shape: float, scale: float, n: int, seed: int) -> np.ndarray:
    """Exact Gamma draws (numpy's Marsaglia-Tsang sampler on a Philox stream)."""
    if not shape > 0 or not scale > 0:
        raise DomainError(f"shape and scale must be positive, got {shape!r}, {scale!r}")
    return make_rng(seed).gamma(shape, scale, size=n)


def sample_subgamma_example1(n: int, d: int, b: float, seed: int) -> np.ndarray:
    """Scale mixture ``X = sqrt(U) Z`` with ``U ~ Gamma(1/(2b^2), 2b^2)``, ``Z ~ N(0, I_d)``.

    ``E U = 1``; ``b = 0`` is the standard Gaussian.
    """
    if b < 0:
        raise DomainError(f"b must be nonnegative, got {b!r}")
    if b == 0:
        return sample_gaussian(n, d, seed)
    rng = make_rng(seed)
    z = rng.standard_normal((n, d))
    u = rng.gamma(1.0 / (2.0 * b * b), 2.0 * b * b, size=n)
    return np.sqrt(u)[:, None] * z


def smooth(points, sigma: float, seed: int) -> np.ndarray:
    """Add iid ``N(0, sigma^2 I_d)`` noise to every point."""
    X = np.asarray(points, dtype=float)
    if sigma < 0:
        raise DomainError(f"sigma must be nonnegative, got {sigma!r}")
    if sigma == 0:
        return X.copy()
    return X + sigma * make_rng(seed).standard_normal(X.shape)


def sample_unit_sphere(n: int, N: int, seed: int) -> np.ndarray:
    """``n`` iid uniform points on the unit sphere of ``R^N`` (normalized Gaussians)."""
    if n < 1 or N < 1:
        raise ValueError("need n >= 1 and N >= 1")
    rng = make_rng(seed)
    g = rng.standard_normal((n, N))
    nrm = np.linalg.norm(g, axis=1)
    while np.any(nrm == 0):  # measure zero, but keep the rows well defined
        bad = nrm == 0
        g[bad] = rng.standard_normal((int(bad.sum()), N))
        nrm = np.linalg.norm(g, axis=1)
    return g / nrm[:, None]


def sample_dependent_gp(design: DependentDesign, d: int, seed: int) -> np.ndarray:
    """``S_i = T(G^T alpha_i)`` with ``G`` an ``N x d`` standard normal matrix.

    ``Z(a) = G^T a`` has covariance ``<a, b> I_d``, so each ``S_i`` is marginally
    ``T(N(0, I_d))``.  ``T`` defaults to the identity.
    """
    G = make_rng(seed).standard_normal((design.N, d))
    Z = design.alphas @ G
    return design.transform(Z) if design.transform is not None else Z


def log_example1_exact_moment(d: int, b: float, s: float) -> float:
    """``log E|X|^s = s log b + log M_{b^-2}(s) + log M_d(s)`` for the scale mixture."""
    if b < 0:
        raise DomainError(f"b must be nonnegative, got {b!r}")
    if b == 0:
        return log_central_chi_moment(d, s)
    nu = 1.0 / (b * b)
    if not s > max(-nu, -d):
        raise DomainError(f"need s > max(-1/b^2, -d) = {max(-nu, -d)}, got {s!r}")
    return s * math.log(b) + log_central_chi_moment(nu, s) + log_central_chi_moment(d, s)


def example1_exact_moment(d: int, b: float, s: float) -> float:
    return math.exp(log_example1_exact_moment(d, b, s))


def example1_log_mgf(alpha_norm, b: float):
    """``log E exp(a.X) = -(1/(2b^2)) log(1 - b^2 |a|^2)`` for the scale mixture.

    The ``b -> 0`` limit ``|a|^2 / 2`` is returned exactly at ``b = 0``.
    """
    a = np.asarray(alpha_norm, dtype=float)
    if np.any(a < 0):
        raise DomainError("alpha_norm must be nonnegative")
    if b < 0:
        raise DomainError(f"b must be nonnegative, got {b!r}")
    if b == 0:
        out = 0.5 * a * a
    else:
        if np.any(a * b >= 1):
            raise DomainError("the MGF is finite only for alpha_norm * b < 1")
        out = -np.log1p(-(a * b) ** 2) / (2.0 * b * b)
    return float(out) if out.ndim == 0 else out


def subgamma_log_mgf_envelope(alpha_norm, v: float, b: float):
    """Sub-gamma envelope ``v |a|^2 / (2 (1 - b |a|))`` for ``b |a| < 1``."""
    a = np.asarray(alpha_norm, dtype=float)
    if np.any(a * b >= 1):
        raise DomainError("the envelope is defined only for alpha_norm * b < 1")
    out = v * a * a / (2.0 * (1.0 - b * a))
    return float(out) if out.ndim == 0 else out
