"""Gamma ratios and central / noncentral chi moments, evaluated in log space.

The noncentral chi law is the law of ``||Z||`` for ``Z ~ N(mu, I_d)`` with
``u = ||mu||``.  Its ``s``-th moment is the Poisson mixture

    M_{d,u}(s) = sum_k Pois(k; u^2/2) * M_{d+2k}(s),

with central moments ``M_d(s) = 2^{s/2} Gamma((d+s)/2) / Gamma(d/2)``.  For
``s = 2l`` the mixture collapses to a degree-``l`` polynomial in ``u^2``.

Everything is computed from logarithms; the linear-space functions only
exponentiate at the end (or use exact products for even integer orders).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange
from scipy.special import gammaln, logsumexp

__all__ = [
    "DomainError",
    "log_gamma",
    "log_central_chi_moment",
    "central_chi_moment",
    "log_mbar",
    "mbar",
    "log_noncentral_chi_moment",
    "noncentral_chi_moment",
    "log_noncentral_chi_moment_series",
    "log_noncentral_chi_moment_even",
    "noncentral_chi_moment_even",
    "log_noncentral_chi_density",
    "noncentral_chi_density",
    "even_order",
]

LOG2 = math.log(2.0)

# Relative size of the geometric tail bound at which a series is cut.
SERIES_TOL = 1e-17


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a formula."""


def log_gamma(z):
    """Natural log of the gamma function for ``z > 0`` (scalar or array)."""
    z_arr = np.asarray(z, dtype=float)
    if np.any(~(z_arr > 0)):
        raise DomainError(f"log_gamma requires z > 0, got {z!r}")
    if z_arr.ndim == 0:
        return math.lgamma(float(z_arr))
    return gammaln(z_arr)


def even_order(s) -> int | None:
    """Return ``l`` if ``s == 2*l`` for a nonnegative integer ``l``, else None.

    The comparison is exact; no rounding is applied.
    """
    s = float(s)
    if s >= 0 and s % 2.0 == 0.0 and math.isfinite(s):
        return int(s) // 2
    return None


def _check_order(d, s):
    if not d > 0:
        raise DomainError(f"degrees of freedom must be positive, got {d!r}")
    if not s > -d:
        raise DomainError(f"moment of order s={s!r} diverges for d={d!r} (need s > -d)")


# ---------------------------------------------------------------------------
# central chi
# ---------------------------------------------------------------------------

def log_central_chi_moment(d, s) -> float:
    """``log M_d(s)``; ``d`` may be any positive real (used with d = b^-2)."""
    d = float(d)
    s = float(s)
    _check_order(d, s)
    return 0.5 * s * LOG2 + math.lgamma(0.5 * (d + s)) - math.lgamma(0.5 * d)


def central_chi_moment(d, s) -> float:
    """``M_d(s) = E||Z||^s`` for ``Z ~ N(0, I_d)``.

    Even integer orders use the exact product ``d (d+2) ... (d+2l-2)``.
    """
    d = float(d)
    s = float(s)
    _check_order(d, s)
    ell = even_order(s)
    if ell is not None:
        out = 1.0
        for i in range(ell):
            out *= d + 2.0 * i
        if math.isfinite(out):
            return out
    return math.exp(log_central_chi_moment(d, s))


def log_mbar(d, s) -> float:
    """Log of the upper envelope ``((d+s)/e)^{s/2} ((d+s)/d)^{(d-1)/2}``."""
    d = float(d)
    s = float(s)
    if not d > 0:
        raise DomainError(f"d must be positive, got {d!r}")
    if not d + s > 0:
        raise DomainError(f"need d + s > 0, got d={d!r}, s={s!r}")
    return 0.5 * s * (math.log(d + s) - 1.0) + 0.5 * (d - 1.0) * (math.log(d + s) - math.log(d))


def mbar(d, s) -> float:
    if s < 0:
        raise DomainError(f"mbar is defined for s >= 0, got {s!r}")
    return math.exp(log_mbar(d, s))


# ---------------------------------------------------------------------------
# noncentral chi: Poisson-mixture series
# ---------------------------------------------------------------------------

@njit(cache=True)
def _log_moment_series(d, u, s, tol):
    # Terms t_k = Pois(k; lam) M_{d+2k}(s) satisfy
    #   t_{k+1}/t_k = lam/(k+1) * (d+2k+s)/(d+2k).
    # Start from the (approximate) largest term and walk outward; each side
    # stops once a geometric bound on its remaining tail is below tol * sum.
    lam = 0.5 * u * u
    if lam == 0.0:
        return 0.5 * s * LOG2 + math.lgamma(0.5 * (d + s)) - math.lgamma(0.5 * d)
    # ratio == 1  <=>  2k^2 + (d + 2 - 2 lam) k + d - lam (d + s) = 0
    bq = d + 2.0 - 2.0 * lam
    disc = bq * bq - 8.0 * (d - lam * (d + s))
    kstar = 0.0
    if disc > 0.0:
        kstar = (-bq + math.sqrt(disc)) / 4.0
    k0 = math.floor(kstar) if kstar > 0.0 else 0.0
    log_t0 = (-lam + k0 * math.log(lam) - math.lgamma(k0 + 1.0)
              + 0.5 * s * LOG2 + math.lgamma(0.5 * (d + 2.0 * k0 + s))
              - math.lgamma(0.5 * (d + 2.0 * k0)))
    total = 1.0

    # upward
    cur = 1.0
    k = k0
    while True:
        a = d + 2.0 * k
        cur *= lam / (k + 1.0) * (a + s) / a
        total += cur
        k += 1.0
        a = d + 2.0 * k
        rho = lam / (k + 1.0) * max(1.0, (a + s) / a)
        if rho < 1.0 and cur * rho / (1.0 - rho) <= tol * total:
            break

    # downward
    worst = d / (d + s) if s < 0.0 else 1.0
    cur = 1.0
    k = k0
    while k > 0.0:
        a = d + 2.0 * k - 2.0
        cur *= k / lam * a / (a + s)
        total += cur
        k -= 1.0
        if k == 0.0:
            break
        rho = k / lam * worst
        if rho < 1.0 and cur * rho / (1.0 - rho) <= tol * total:
            break
    return log_t0 + math.log(total)


@njit(cache=True, parallel=True)
def _log_moment_series_vec(d, u, s, tol):
    out = np.empty(u.shape[0])
    for i in prange(u.shape[0]):
        out[i] = _log_moment_series(d, u[i], s, tol)
    return out


def log_noncentral_chi_moment_series(d, u, s, tol: float = SERIES_TOL):
    """``log M_{d,u}(s)`` by the Poisson-mixture series, for any ``s > -d``.

    ``u`` may be a scalar or an array; arrays are evaluated elementwise.
    """
    d = float(d)
    s = float(s)
    _check_order(d, s)
    u_arr = np.asarray(u, dtype=float)
    if np.any(~(u_arr >= 0)):
        raise DomainError("noncentrality u must be nonnegative")
    if u_arr.ndim == 0:
        return _log_moment_series(d, float(u_arr), s, tol)
    flat = np.ascontiguousarray(u_arr.ravel())
    return _log_moment_series_vec(d, flat, s, tol).reshape(u_arr.shape)


# ---------------------------------------------------------------------------
# noncentral chi: even orders in closed form
# ---------------------------------------------------------------------------

def _even_log_coefficients(d: float, ell: int) -> np.ndarray:
    """Log of the coefficients of ``(u^2)^j`` in ``M_{d,u}(2 ell)``, j = 0..ell."""
    j = np.arange(ell + 1, dtype=float)
    log_binom = gammaln(ell + 1.0) - gammaln(j + 1.0) - gammaln(ell - j + 1.0)
    return (ell * LOG2 + gammaln(ell + 0.5 * d) - gammaln(j + 0.5 * d)
            + log_binom - j * LOG2)


def even_coefficients(d, ell: int) -> np.ndarray:
    """Coefficients ``a_j`` with ``M_{d,u}(2 ell) = sum_j a_j u^{2j}``.

    Built from exact products, ``a_j = 2^{ell-j} C(ell, j) prod_{i=j}^{ell-1}(i + d/2)``.
    """
    d = float(d)
    out = np.empty(ell + 1)
    for j in range(ell + 1):
        prod = 1.0
        for i in range(j, ell):
            prod *= i + 0.5 * d
        out[j] = 2.0 ** (ell - j) * math.comb(ell, j) * prod
    return out


def log_noncentral_chi_moment_even(d, u, ell: int):
    """``log M_{d,u}(2 ell)`` from the closed-form polynomial in ``u^2``."""
    d = float(d)
    if not d > 0:
        raise DomainError(f"d must be positive, got {d!r}")
    if ell < 0 or int(ell) != ell:
        raise DomainError(f"ell must be a nonnegative integer, got {ell!r}")
    ell = int(ell)
    u_arr = np.asarray(u, dtype=float)
    logc = _even_log_coefficients(d, ell)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_u2 = 2.0 * np.log(u_arr)
        j = np.arange(ell + 1, dtype=float)
        pw = np.where(j == 0, 0.0, j * log_u2[..., None])
    res = logsumexp(logc + pw, axis=-1)
    return float(res) if u_arr.ndim == 0 else res


def noncentral_chi_moment_even(d, u, ell: int):
    """``M_{d,u}(2 ell)``, evaluated directly in linear space where finite."""
    d = float(d)
    if ell < 0 or int(ell) != ell:
        raise DomainError(f"ell must be a nonnegative integer, got {ell!r}")
    ell = int(ell)
    u_arr = np.asarray(u, dtype=float)
    coef = even_coefficients(d, ell)
    u2 = u_arr * u_arr
    acc = np.zeros_like(u2)
    for c in coef[::-1]:
        acc = acc * u2 + c
    if not np.all(np.isfinite(acc)):
        acc = np.exp(log_noncentral_chi_moment_even(d, u_arr, ell))
    return float(acc) if u_arr.ndim == 0 else acc


# ---------------------------------------------------------------------------
# noncentral chi: dispatch
# ---------------------------------------------------------------------------

def log_noncentral_chi_moment(d, u, s, method: str = "auto"):
    """``log M_{d,u}(s)``.

    ``method="auto"`` picks the closed form when ``s`` is exactly an even
    nonnegative integer and the series otherwise; ``"series"`` and ``"even"``
    force one route.
    """
    d = float(d)
    s = float(s)
    _check_order(d, s)
    ell = even_order(s)
    if method == "even" or (method == "auto" and ell is not None):
        if ell is None:
            raise DomainError(f"closed form needs an even integer order, got s={s!r}")
        return log_noncentral_chi_moment_even(d, u, ell)
    if method not in ("auto", "series"):
        raise ValueError(f"unknown method {method!r}")
    return log_noncentral_chi_moment_series(d, u, s)


def noncentral_chi_moment(d, u, s, method: str = "auto"):
    """``M_{d,u}(s) = E||Z||^s`` for ``Z ~ N(mu, I_d)``, ``||mu|| = u``."""
    d = float(d)
    s = float(s)
    _check_order(d, s)
    if method in ("auto", "even") and even_order(s) is not None:
        return noncentral_chi_moment_even(d, u, even_order(s))
    out = np.exp(log_noncentral_chi_moment(d, u, s, method=method))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# noncentral chi density
# ---------------------------------------------------------------------------

@njit(cache=True)
def _log_density_sum(d, z, tol):
    # log sum_k z^k / (k! Gamma(d/2 + k)); term ratio z / ((k+1)(k+d/2))
    h = 0.5 * d
    if z == 0.0:
        return -math.lgamma(h)
    bq = 1.0 + h
    kstar = (-bq + math.sqrt(bq * bq - 4.0 * (h - z))) / 2.0
    k0 = math.floor(kstar) if kstar > 0.0 else 0.0
    log_t0 = k0 * math.log(z) - math.lgamma(k0 + 1.0) - math.lgamma(h + k0)
    total = 1.0
    cur = 1.0
    k = k0
    while True:
        cur *= z / ((k + 1.0) * (h + k))
        total += cur
        k += 1.0
        rho = z / ((k + 1.0) * (h + k))
        if rho < 1.0 and cur * rho / (1.0 - rho) <= tol * total:
            break
    cur = 1.0
    k = k0
    while k > 0.0:
        cur *= k * (h + k - 1.0) / z
        total += cur
        k -= 1.0
        if k == 0.0:
            break
        rho = k * (h + k - 1.0) / z
        if rho < 1.0 and cur * rho / (1.0 - rho) <= tol * total:
            break
    return log_t0 + math.log(total)


@njit(cache=True)
def _log_density(d, u, x, tol):
    if x <= 0.0:
        if d == 1.0 and x == 0.0:
            return -0.5 * u * u + 0.5 * LOG2 - 0.5 * math.log(math.pi)
        return -np.inf
    z = 0.25 * u * u * x * x
    return (-0.5 * (x * x + u * u) + (d - 1.0) * math.log(x)
            - (0.5 * d - 1.0) * LOG2 + _log_density_sum(d, z, tol))


@njit(cache=True)
def _log_density_vec(d, u, x, tol):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = _log_density(d, u, x[i], tol)
    return out


def log_noncentral_chi_density(d, u, x):
    """Log density of the noncentral chi law with ``d`` dof and parameter ``u``."""
    d = float(d)
    u = float(u)
    if not d > 0:
        raise DomainError(f"d must be positive, got {d!r}")
    if not u >= 0:
        raise DomainError(f"u must be nonnegative, got {u!r}")
    x_arr = np.asarray(x, dtype=float)
    if x_arr.ndim == 0:
        return _log_density(d, u, float(x_arr), SERIES_TOL)
    flat = np.ascontiguousarray(x_arr.ravel())
    return _log_density_vec(d, u, flat, SERIES_TOL).reshape(x_arr.shape)


def noncentral_chi_density(d, u, x):
    """Density ``g_{d,u}(x)`` of ``||Z||``, ``Z ~ N(mu, I_d)``, ``||mu|| = u``."""
    out = np.exp(log_noncentral_chi_density(d, u, x))
    return float(out) if np.ndim(out) == 0 else out
