"""The two-moment kernel and its validation routes.

For smoothing level ``sigma`` and OT order ``p`` the kernel on ``R^d`` is

    k(x, y) = alpha_{d,p} * exp(-||x - y||^2 / (4 sigma^2)) * J(||x + y|| / (sqrt(2) sigma)),
    J(u)    = (lam^eps M_{d,u}(r - eps) + lam^-eps M_{d,u}(r + eps)) / (2 eps),   r = d + 2p.

It arises from the feature map ``psi_x(z) ~ ||z||^{(r-1)/2} f(||z||)^{-1/2} phi(z/sqrt2 - x/sigma)``
with a generalized beta-prime radial density ``f``.  This module provides the
fast evaluation paths (series, and a polynomial when ``r +- eps`` are even
integers) plus two slow quadrature routes that rebuild the kernel from ``f``
and from the feature map, used only for cross-validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numba import njit, prange
from scipy import integrate, optimize
from scipy.special import gammaln, roots_legendre

from .special_fns import (
    LOG2,
    SERIES_TOL,
    DomainError,
    even_coefficients,
    even_order,
    log_noncentral_chi_density,
    log_noncentral_chi_moment,
)

__all__ = [
    "KernelParams",
    "PolynomialKernel",
    "RadialDensity",
    "TwoMomentKernel",
    "QuadratureError",
    "default_params",
    "log_alpha_coeff",
    "alpha_coeff",
    "log_J",
    "J",
    "kernel_log_eval",
    "kernel_eval",
    "polynomial_coefficients",
    "j_coefficients",
    "beta_prime_density",
    "i_f_quadrature",
    "feature_inner_product",
    "log_gram",
    "gram",
    "JTable",
    "build_j_table",
]

# Upper limit of radial quadratures is u + QUAD_SPAN * sqrt(d + 2p).
QUAD_SPAN = 12.0


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved):
        super().__init__(f"{message} (achieved relative error {achieved:.3g})")
        self.achieved = achieved


@dataclass(frozen=True)
class KernelParams:
    """Parameters ``(d, p, sigma, epsilon, lam)`` of the two-moment kernel."""

    d: int
    p: float
    sigma: float
    epsilon: float
    lam: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"d must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        if not self.p > 0:
            raise DomainError(f"p must be positive, got {self.p!r}")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma!r}")
        if not 0 < self.epsilon <= self.r:
            raise DomainError(f"epsilon must lie in (0, d + 2p] = (0, {self.r}], got {self.epsilon!r}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise DomainError(f"lambda must be positive and finite, got {self.lam!r}")

    @property
    def r(self) -> float:
        return self.d + 2.0 * self.p

    @property
    def log_alpha(self) -> float:
        return log_alpha_coeff(self.d, self.p)

    @property
    def has_polynomial(self) -> bool:
        """True when ``r - eps`` and ``r + eps`` are both even integers (exact test)."""
        return even_order(self.r - self.epsilon) is not None and even_order(self.r + self.epsilon) is not None


def default_params(d: int, p: float, sigma: float, polynomial: bool = False) -> KernelParams:
    """Fallback parameters when no distribution information is available.

    ``epsilon = min(d + 2p, sqrt(d))`` and ``lam = 1``.  With
    ``polynomial=True`` epsilon is moved to the nearest value for which
    ``d + 2p +- epsilon`` are even integers.
    """
    r = d + 2.0 * p
    eps = min(r, math.sqrt(d))
    if polynomial:
        if r != math.floor(r):
            raise DomainError(f"d + 2p = {r} is not an integer; no polynomial form exists")
        ri = int(r)
        start = 2 if ri % 2 == 0 else 1
        candidates = np.arange(start, ri + 1, 2, dtype=float)
        eps = float(candidates[np.argmin(np.abs(candidates - eps))])
    return KernelParams(d=d, p=p, sigma=sigma, epsilon=eps, lam=1.0)


def log_alpha_coeff(d, p) -> float:
    """``log alpha_{d,p}`` with ``alpha_{d,p} = 2 pi 2^{-(p+d)} 2^{-d/2} / Gamma(d/2)``."""
    if not d >= 1 or not p > 0:
        raise DomainError(f"need d >= 1 and p > 0, got d={d!r}, p={p!r}")
    return math.log(2.0 * math.pi) - (p + d) * LOG2 - 0.5 * d * LOG2 - math.lgamma(0.5 * d)


def alpha_coeff(d, p) -> float:
    return math.exp(log_alpha_coeff(d, p))


# ---------------------------------------------------------------------------
# J(u): fused series for both moments
# ---------------------------------------------------------------------------

@njit(cache=True)
def _log_two_moment_sum(d, u, s1, s2, c1, c2, tol, inv_int, inv_a):
    # log(e^c1 M_{d,u}(s1) + e^c2 M_{d,u}(s2)) via one Poisson-mixture sweep.
    lam = 0.5 * u * u
    if lam == 0.0:
        a1 = c1 + 0.5 * s1 * LOG2 + math.lgamma(0.5 * (d + s1)) - math.lgamma(0.5 * d)
        a2 = c2 + 0.5 * s2 * LOG2 + math.lgamma(0.5 * (d + s2)) - math.lgamma(0.5 * d)
        m = max(a1, a2)
        return m + math.log(math.exp(a1 - m) + math.exp(a2 - m))
    s = 0.5 * (s1 + s2)
    bq = d + 2.0 - 2.0 * lam
    disc = bq * bq - 8.0 * (d - lam * (d + s))
    kstar = (-bq + math.sqrt(disc)) / 4.0 if disc > 0.0 else 0.0
    k0 = int(math.floor(kstar)) if kstar > 0.0 else 0
    nk = inv_a.shape[0] - 2
    if k0 >= nk:
        return np.nan
    base = (-lam + k0 * math.log(lam) - math.lgamma(k0 + 1.0)
            - math.lgamma(0.5 * (d + 2.0 * k0)))
    l1 = c1 + 0.5 * s1 * LOG2 + math.lgamma(0.5 * (d + 2.0 * k0 + s1))
    l2 = c2 + 0.5 * s2 * LOG2 + math.lgamma(0.5 * (d + 2.0 * k0 + s2))
    m = max(l1, l2)
    w1 = math.exp(l1 - m)
    w2 = math.exp(l2 - m)
    total = w1 + w2
    smax = max(s1, s2)

    p1 = 1.0
    p2 = 1.0
    k = k0
    while True:
        f = lam * inv_int[k + 1]
        ia = inv_a[k]
        p1 *= f * (1.0 + s1 * ia)
        p2 *= f * (1.0 + s2 * ia)
        cur = w1 * p1 + w2 * p2
        total += cur
        k += 1
        if k >= nk:
            return np.nan
        rho = lam * inv_int[k + 1] * max(1.0, 1.0 + smax * inv_a[k])
        if rho < 1.0 and cur * rho <= tol * total * (1.0 - rho):
            break

    smin = min(s1, s2)
    worst = d / (d + smin) if smin < 0.0 else 1.0
    inv_lam = 1.0 / lam
    p1 = 1.0
    p2 = 1.0
    k = k0
    while k > 0:
        f = k * inv_lam
        ia = inv_a[k - 1]
        p1 *= f / (1.0 + s1 * ia)
        p2 *= f / (1.0 + s2 * ia)
        cur = w1 * p1 + w2 * p2
        total += cur
        k -= 1
        if k == 0:
            break
        rho = k * inv_lam * worst
        if rho < 1.0 and cur * rho <= tol * total * (1.0 - rho):
            break
    return base + m + math.log(total)


@njit(cache=True)
def _series_tables(d, lam_max, smax):
    kmax = int(lam_max * (1.0 + max(smax, 0.0) / d) + 40.0 * math.sqrt(lam_max) + 400.0)
    inv_int = np.empty(kmax + 2)
    inv_int[0] = 0.0
    for i in range(1, kmax + 2):
        inv_int[i] = 1.0 / i
    inv_a = np.empty(kmax + 2)
    for i in range(kmax + 2):
        inv_a[i] = 1.0 / (d + 2.0 * i)
    return inv_int, inv_a


@njit(cache=True)
def _log_poly(logc, w):
    # log sum_l exp(logc[l]) w^l for w >= 0
    if w == 0.0:
        return logc[0]
    lw = math.log(w)
    m = -np.inf
    for l in range(logc.shape[0]):
        t = logc[l] + l * lw
        if t > m:
            m = t
    acc = 0.0
    for l in range(logc.shape[0]):
        acc += math.exp(logc[l] + l * lw - m)
    return m + math.log(acc)


MODE_SERIES, MODE_POLY, MODE_TABLE = 0, 1, 2


@njit(cache=True)
def _cheb_eval(coef, h, u):
    # Clenshaw on panel int(u/h), mapped to [-1, 1]
    i = int(u / h)
    t = 2.0 * (u - i * h) / h - 1.0
    b1 = 0.0
    b2 = 0.0
    for k in range(coef.shape[1] - 1, 0, -1):
        b0 = 2.0 * t * b1 - b2 + coef[i, k]
        b2 = b1
        b1 = b0
    return t * b1 - b2 + coef[i, 0]


@njit(cache=True)
def _log_j_one(u, d, s1, s2, c1, c2, tol, inv_int, inv_a, mode, logc, cheb, h):
    if mode == MODE_POLY:
        return _log_poly(logc, u * u)
    if mode == MODE_TABLE and int(u / h) < cheb.shape[0]:
        return _cheb_eval(cheb, h, u)
    return _log_two_moment_sum(d, u, s1, s2, c1, c2, tol, inv_int, inv_a)


@njit(cache=True, parallel=True)
def _log_j_vec(u, d, s1, s2, c1, c2, tol, mode, logc, cheb, h):
    lam_max = 0.0
    for i in range(u.shape[0]):
        lam_max = max(lam_max, 0.5 * u[i] * u[i])
    inv_int, inv_a = _series_tables(d, lam_max, max(s1, s2))
    out = np.empty(u.shape[0])
    for i in prange(u.shape[0]):
        out[i] = _log_j_one(u[i], d, s1, s2, c1, c2, tol, inv_int, inv_a, mode, logc, cheb, h)
    return out


@njit(cache=True, parallel=True)
def _log_gram_kernel(A, B, symmetric, sigma, log_const, d, s1, s2, c1, c2, tol, mode, logc, cheb, h):
    n = A.shape[0]
    m = B.shape[0]
    dim = A.shape[1]
    inv_4s2 = 1.0 / (4.0 * sigma * sigma)
    inv_2s2 = 1.0 / (2.0 * sigma * sigma)
    # series table size from the largest possible ||x + y||
    amax = 0.0
    for i in range(n):
        acc = 0.0
        for c in range(dim):
            acc += A[i, c] * A[i, c]
        amax = max(amax, acc)
    bmax = 0.0
    for j in range(m):
        acc = 0.0
        for c in range(dim):
            acc += B[j, c] * B[j, c]
        bmax = max(bmax, acc)
    lam_max = 0.5 * (math.sqrt(amax) + math.sqrt(bmax)) ** 2 * inv_2s2
    inv_int, inv_a = _series_tables(d, lam_max, max(s1, s2))
    out = np.empty((n, m))
    for i in prange(n):
        j0 = i if symmetric else 0
        for j in range(j0, m):
            sm = 0.0
            sp = 0.0
            for c in range(dim):
                dm = A[i, c] - B[j, c]
                dp = A[i, c] + B[j, c]
                sm += dm * dm
                sp += dp * dp
            u = math.sqrt(sp * inv_2s2)
            val = log_const - sm * inv_4s2 + _log_j_one(
                u, d, s1, s2, c1, c2, tol, inv_int, inv_a, mode, logc, cheb, h)
            out[i, j] = val
            if symmetric:
                out[j, i] = val
    return out


_NO_TABLE = np.zeros((1, 1))


def _series_args(params: KernelParams):
    r, eps = params.r, params.epsilon
    le = eps * math.log(params.lam)
    c1 = le - math.log(2.0 * eps)
    c2 = -le - math.log(2.0 * eps)
    return float(params.d), r - eps, r + eps, c1, c2, SERIES_TOL


@dataclass(frozen=True)
class JTable:
    """Piecewise Chebyshev interpolant of ``log J`` on ``[0, umax]``."""

    coef: np.ndarray
    h: float
    umax: float
    max_error: float


# interpolation acceptance: absolute error in log J, i.e. relative error in J
TABLE_TOL = 1e-12
TABLE_DEGREE = 15


def _cheb_fit(params: KernelParams, h: float, npan: int, deg: int) -> np.ndarray:
    k = np.arange(deg + 1)
    x = np.cos(np.pi * (k + 0.5) / (deg + 1))
    u = ((np.arange(npan)[:, None] + 0.5 * (x[None, :] + 1.0)) * h).ravel()
    vals = _log_j_vec(u, *_series_args(params), MODE_SERIES, np.zeros(1), _NO_TABLE, 1.0)
    vals = vals.reshape(npan, deg + 1)
    T = np.cos(np.pi * np.outer(k, k + 0.5) / (deg + 1))
    coef = (2.0 / (deg + 1)) * vals @ T.T
    coef[:, 0] *= 0.5
    return np.ascontiguousarray(coef)


@lru_cache(maxsize=64)
def build_j_table(params: KernelParams, umax: float, tol: float = TABLE_TOL) -> JTable:
    """Interpolation table for ``log J`` verified against the series to ``tol``.

    Panels are halved until the error at off-node check points (three per
    panel) is below ``tol * max(1, |log J|)``.
    """
    h = 0.5
    for _ in range(12):
        npan = int(math.ceil(umax / h)) + 1
        coef = _cheb_fit(params, h, npan, TABLE_DEGREE)
        uc = ((np.arange(npan)[:, None] + np.array([0.137, 0.5, 0.911])[None, :]) * h).ravel()
        exact = _log_j_vec(uc, *_series_args(params), MODE_SERIES, np.zeros(1), _NO_TABLE, 1.0)
        approx = np.array([_cheb_eval(coef, h, v) for v in uc])
        err = float(np.max(np.abs(approx - exact) / np.maximum(1.0, np.abs(exact))))
        if err <= tol:
            return JTable(coef, h, npan * h, err)
        h *= 0.5
    raise FloatingPointError(f"log J interpolation did not reach {tol:g} (best {err:.3g})")


def _j_args(params: KernelParams, method: str, umax: float = 0.0):
    if method == "auto":
        mode = MODE_POLY if params.has_polynomial else MODE_SERIES
    elif method == "polynomial":
        if not params.has_polynomial:
            raise DomainError("polynomial form needs d + 2p +- epsilon to be even integers")
        mode = MODE_POLY
    elif method == "series":
        mode = MODE_SERIES
    elif method == "table":
        mode = MODE_TABLE
    else:
        raise ValueError(f"unknown method {method!r}")
    logc = np.log(j_coefficients(params)) if mode == MODE_POLY else np.zeros(1)
    cheb, h = _NO_TABLE, 1.0
    if mode == MODE_TABLE:
        # round the range up so nearby calls share a cached table
        table = build_j_table(params, float(math.ceil(umax + 1.0)))
        cheb, h = table.coef, table.h
    return (*_series_args(params), mode, logc, cheb, h)


def log_J(u, params: KernelParams, method: str = "auto"):
    """``log J(u)``; ``method`` is ``"auto"``, ``"series"``, ``"polynomial"``, ``"table"`` or ``"moments"``.

    ``"moments"`` evaluates the two noncentral chi moments separately through
    :mod:`gotmmd.special_fns` and combines them with log-sum-exp.  ``"table"``
    uses the interpolant of :func:`build_j_table` (relative error below 1e-12).
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any(~(u_arr >= 0)):
        raise DomainError("J is defined for u >= 0")
    if method == "moments":
        r, eps = params.r, params.epsilon
        le = eps * math.log(params.lam)
        lo = log_noncentral_chi_moment(params.d, u_arr, r - eps)
        hi = log_noncentral_chi_moment(params.d, u_arr, r + eps)
        out = np.logaddexp(le + lo, -le + hi) - math.log(2.0 * eps)
        return float(out) if u_arr.ndim == 0 else out
    flat = np.ascontiguousarray(u_arr.ravel())
    args = _j_args(params, method, float(flat.max()) if flat.size else 0.0)
    out = _log_j_vec(flat, *args)
    if np.any(np.isnan(out)):
        raise FloatingPointError("series table exhausted while evaluating J")
    return float(out[0]) if u_arr.ndim == 0 else out.reshape(u_arr.shape)


def J(u, params: KernelParams, method: str = "auto"):
    out = np.exp(log_J(u, params, method))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# polynomial form
# ---------------------------------------------------------------------------

def j_coefficients(params: KernelParams) -> np.ndarray:
    """Coefficients of ``J(u) = sum_l j_l u^{2l}`` when the polynomial form exists."""
    if not params.has_polynomial:
        raise DomainError("polynomial form needs d + 2p +- epsilon to be even integers")
    eps = params.epsilon
    L = even_order(params.r + eps)
    low = even_order(params.r - eps)
    hi_c = even_coefficients(params.d, L)
    lo_c = np.zeros(L + 1)
    lo_c[: low + 1] = even_coefficients(params.d, low)
    lam_e = params.lam ** eps
    return (lam_e * lo_c + hi_c / lam_e) / (2.0 * eps)


@dataclass(frozen=True)
class PolynomialKernel:
    """``k(x,y) = exp(-||x-y||^2/(4 sigma^2)) sum_l c_l (||x+y||/(sqrt2 sigma))^{2l}``."""

    coefficients: np.ndarray
    sigma: float

    @property
    def L(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x, y) -> float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        w = np.sum((x + y) ** 2) / (2.0 * self.sigma**2)
        poly = np.polynomial.polynomial.polyval(w, self.coefficients)
        return float(np.exp(-np.sum((x - y) ** 2) / (4.0 * self.sigma**2)) * poly)


def polynomial_coefficients(params: KernelParams) -> PolynomialKernel:
    """``c_l = alpha_{d,p} j_l`` for ``l = 0..L``, ``L = (d + 2p + eps) / 2``."""
    return PolynomialKernel(coefficients=alpha_coeff(params.d, params.p) * j_coefficients(params),
                            sigma=params.sigma)


# ---------------------------------------------------------------------------
# point evaluation and Gram matrices
# ---------------------------------------------------------------------------

def _as_points(X, d=None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError(f"expected an (n, d) array of points, got shape {X.shape}")
    if d is not None and X.shape[1] != d:
        raise ValueError(f"dimension mismatch: points have {X.shape[1]} coordinates, kernel expects d={d}")
    return np.ascontiguousarray(X)


def log_gram(A, params: KernelParams, B=None, method: str = "auto") -> np.ndarray:
    """Matrix of ``log k(a_i, b_j)``; ``B=None`` gives the symmetric Gram of ``A``.

    Every entry is computed independently from ``||a - b||`` and ``||a + b||``,
    so the result is exactly symmetric and does not depend on the thread count.
    ``method="table"`` trades the per-entry series for a verified interpolant
    of ``log J``, which is several times faster on large Gram matrices.
    """
    A = _as_points(A, params.d)
    symmetric = B is None
    B = A if symmetric else _as_points(B, params.d)
    umax = 0.0
    if method == "table":
        umax = (np.sqrt(np.max(np.sum(A * A, axis=1))) + np.sqrt(np.max(np.sum(B * B, axis=1)))) \
            / (math.sqrt(2.0) * params.sigma)
    args = _j_args(params, method, umax)
    out = _log_gram_kernel(A, B, symmetric, float(params.sigma), params.log_alpha, *args)
    if np.any(np.isnan(out)):
        raise FloatingPointError("series table exhausted while building Gram matrix")
    return out


def gram(A, params: KernelParams, B=None, method: str = "auto") -> np.ndarray:
    """Gram matrix ``k(a_i, b_j)`` (symmetric ``k(a_i, a_j)`` when ``B`` is None)."""
    return np.exp(log_gram(A, params, B, method))


def kernel_log_eval(x, y, params: KernelParams, method: str = "auto") -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (params.d,) or y.shape != (params.d,):
        raise ValueError(f"dimension mismatch: expected points in R^{params.d}, got {x.shape} and {y.shape}")
    if method == "moments":
        return float(_log_paired(x, y, params, method)[0])
    return float(log_gram(x, params, y, method)[0, 0])


def kernel_eval(x, y, params: KernelParams, method: str = "auto") -> float:
    """``k(x, y)`` for the two-moment kernel."""
    return math.exp(kernel_log_eval(x, y, params, method))


def _log_paired(A, B, params: KernelParams, method: str = "auto") -> np.ndarray:
    # log k(a_i, b_i) for matched rows
    A = _as_points(A, params.d)
    B = _as_points(B, params.d)
    if A.shape != B.shape:
        raise ValueError("paired evaluation needs equally many points")
    s2 = params.sigma**2
    sm = np.sum((A - B) ** 2, axis=1)
    u = np.sqrt(np.sum((A + B) ** 2, axis=1) / (2.0 * s2))
    return params.log_alpha - sm / (4.0 * s2) + log_J(u, params, method)


class TwoMomentKernel:
    """Callable wrapper bundling :class:`KernelParams` with Gram helpers."""

    def __init__(self, params: KernelParams, method: str = "auto"):
        self.params = params
        self.method = method

    def __repr__(self):
        return f"TwoMomentKernel({self.params!r})"

    def __call__(self, x, y) -> float:
        return kernel_eval(x, y, self.params, self.method)

    def gram(self, A, B=None) -> np.ndarray:
        return gram(A, self.params, B, self.method)

    def log_gram(self, A, B=None) -> np.ndarray:
        return log_gram(A, self.params, B, self.method)

    def diag(self, A) -> np.ndarray:
        """``k(a_i, a_i) = alpha J(sqrt2 ||a_i|| / sigma)``."""
        return np.exp(self.log_diag(A))

    def log_diag(self, A) -> np.ndarray:
        A = _as_points(A, self.params.d)
        u = np.sqrt(2.0 * np.sum(A * A, axis=1)) / self.params.sigma
        return self.params.log_alpha + log_J(u, self.params, self.method)

    def paired(self, A, B) -> np.ndarray:
        return np.exp(_log_paired(A, B, self.params, self.method))


# ---------------------------------------------------------------------------
# slow routes: radial density quadrature and feature map quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialDensity:
    """A probability density on ``[0, inf)`` with ``f(x) >= a x^{d+2p-1} exp(-b x^2)``."""

    log_evaluator: Callable[[np.ndarray], np.ndarray]
    a: float
    b: float
    info: dict = field(default_factory=dict)

    def __call__(self, x):
        return np.exp(self.log_evaluator(np.asarray(x, dtype=float)))


def _certificate(log_f, r: float, b: float) -> float:
    # a = inf_x f(x) / (x^{r-1} exp(-b x^2)), searched over log x
    def h(t):
        x = math.exp(t)
        return float(log_f(np.asarray(x))) - (r - 1.0) * t + b * x * x

    grid = np.linspace(-20.0, 6.0, 2601)
    vals = np.array([h(t) for t in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(h, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    return math.exp(min(res.fun, vals[i]))


def beta_prime_density(params: KernelParams, b: float = 0.25) -> RadialDensity:
    """Generalized beta-prime density behind the two-moment kernel.

    ``f(x) = (2 eps / (pi x)) ((x/lam)^{-eps} + (x/lam)^{eps})^{-1}``, which
    integrates to one.  The lower-bound constant ``a`` is found numerically for
    the given ``b`` in ``(0, 1/2)``.
    """
    if not 0 < b < 0.5:
        raise DomainError(f"b must lie in (0, 1/2), got {b!r}")
    eps, lam = params.epsilon, params.lam
    log_norm = math.log(2.0 * eps / math.pi)

    def log_f(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            t = eps * (np.log(x) - math.log(lam))
        return log_norm - np.log(x) - np.logaddexp(-t, t)

    a = _certificate(log_f, params.r, b)
    return RadialDensity(log_evaluator=log_f, a=a, b=b,
                         info={"family": "beta_prime", "epsilon": eps, "lambda": lam})


def i_f_quadrature(f: RadialDensity, u: float, d: int, p: float,
                   rtol: float = 1e-8, span: float = QUAD_SPAN) -> float:
    """``I_f(u) = omega_d / (2^{d+p} (2 pi)^{d/2}) * int x^{d-1+2p} g_{d,u}(x) / f(x) dx``.

    Integrated adaptively over ``[0, u + span*sqrt(d + 2p)]``.
    """
    r = d + 2.0 * p
    upper = u + span * math.sqrt(r)
    log_pref = (LOG2 + 0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d)
                - (d + p) * LOG2 - 0.5 * d * math.log(2.0 * math.pi))

    def integrand(x):
        if x <= 0.0:
            return 0.0
        return math.exp((r - 1.0) * math.log(x) - float(f.log_evaluator(np.asarray(x)))
                        + float(log_noncentral_chi_density(d, u, x)))

    pts = [u] if 0.0 < u < upper else None
    val, err = integrate.quad(integrand, 0.0, upper, epsabs=0.0, epsrel=max(0.1 * rtol, 1e-13),
                              limit=500, points=pts)
    achieved = err / abs(val) if val != 0 else math.inf
    if not achieved <= rtol:
        raise QuadratureError("I_f quadrature did not converge", achieved)
    return math.exp(log_pref) * val


def _composite_legendre(lo: float, hi: float, breaks, panel: float, order: int):
    edges = sorted({lo, hi, *[b for b in breaks if lo < b < hi]})
    nodes_ref, w_ref = roots_legendre(order)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        npan = max(1, int(math.ceil((b - a) / panel)))
        cuts = np.linspace(a, b, npan + 1)
        for c0, c1 in zip(cuts[:-1], cuts[1:]):
            half = 0.5 * (c1 - c0)
            xs.append(c0 + half * (nodes_ref + 1.0))
            ws.append(half * w_ref)
    return np.concatenate(xs), np.concatenate(ws)


def feature_inner_product(x, y, params: KernelParams, resolution: int = 16,
                          half_width: float = 9.0, f: RadialDensity | None = None) -> float:
    """``<psi_x, psi_y>`` by tensor-product Gauss-Legendre quadrature over ``R^d``.

    Validation only; refuses ``d > 3``.  ``resolution`` is the number of nodes
    per unit-length panel.
    """
    d = params.d
    if d > 3:
        raise ValueError("feature-map quadrature is limited to d <= 3")
    x = np.asarray(x, dtype=float).reshape(d)
    y = np.asarray(y, dtype=float).reshape(d)
    if f is None:
        f = beta_prime_density(params)
    sig = params.sigma
    # both Gaussian factors are centred near sqrt2 * x / sigma and sqrt2 * y / sigma
    cx, cy = math.sqrt(2.0) * x / sig, math.sqrt(2.0) * y / sig
    axes, weights = [], []
    for c in range(d):
        lo = min(cx[c], cy[c]) - half_width
        hi = max(cx[c], cy[c]) + half_width
        z, w = _composite_legendre(lo, hi, [0.0], panel=1.0, order=resolution)
        axes.append(z)
        weights.append(w)
    grids = np.meshgrid(*axes, indexing="ij")
    Z = np.stack([g.ravel() for g in grids], axis=1)
    W = np.ones(Z.shape[0])
    for c, g in enumerate(np.meshgrid(*weights, indexing="ij")):
        W *= g.ravel()

    log_omega = LOG2 + 0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d)
    rad = np.sqrt(np.sum(Z * Z, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_rad_part = (0.5 * log_omega - 0.5 * (d + params.p) * LOG2
                        + 0.5 * (params.r - 1.0) * np.log(rad) - 0.5 * f.log_evaluator(rad))

    def log_phi(center):
        diff = Z / math.sqrt(2.0) - center / sig
        return -0.5 * d * math.log(2.0 * math.pi) - 0.5 * np.sum(diff * diff, axis=1)

    with np.errstate(invalid="ignore"):
        log_prod = 2.0 * log_rad_part + log_phi(x) + log_phi(y)
    log_prod = np.where(rad > 0, log_prod, -np.inf)
    return float(np.sum(W * np.exp(log_prod)))
