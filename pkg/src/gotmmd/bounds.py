"""Closed-form bounds on E[k(X,X)], moments, GOT rates and dependent-sample MMD.

Every bound has a ``log_*`` form that stays finite for very large ``d``; the
linear form simply exponentiates it.  :class:`BoundReport` bundles a value
with the kernel parameters it refers to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernel import KernelParams, log_alpha_coeff
from .special_fns import DomainError, log_central_chi_moment, log_mbar

__all__ = [
    "BOUND_KINDS",
    "THM6_CONSTANT",
    "BoundReport",
    "select_params_thm4",
    "log_kxx_ub_thm4",
    "kxx_ub_thm4",
    "log_got_rate_ub_thm1",
    "got_rate_ub_thm1",
    "log_moment_ub_thm5",
    "moment_ub_thm5",
    "log_m_t_subgamma",
    "m_t_subgamma",
    "select_params_thm6",
    "log_kxx_ub_thm6",
    "kxx_ub_thm6",
    "log_kxx_lb_example1",
    "kxx_lb_example1",
    "phase_transition_asymptote",
    "dependent_ub_design",
    "dependent_ub_random",
    "hellinger_r_bound",
    "report",
]

BOUND_KINDS = (
    "thm1_rate",
    "thm4_kxx_ub",
    "thm5_moment_ub",
    "thm6_kxx_ub",
    "example1_kxx_lb",
    "dep_eq17",
    "dep_eq18",
)

# sqrt(2 pi) e^{7/8}
THM6_CONSTANT = math.sqrt(2.0 * math.pi) * math.exp(7.0 / 8.0)


@dataclass(frozen=True)
class BoundReport:
    """An evaluated bound, stored in log space."""

    kind: str
    log_value: float
    params_used: KernelParams | None = None
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BOUND_KINDS:
            raise ValueError(f"unknown bound kind {self.kind!r}")
        if not math.isfinite(self.log_value):
            raise FloatingPointError(f"{self.kind} bound is not finite in log space")

    @property
    def value(self) -> float:
        """Linear value; ``inf`` when it overflows a double."""
        return math.exp(self.log_value) if self.log_value < 709.0 else math.inf

    def csv_row(self) -> dict:
        eps = self.params_used.epsilon if self.params_used is not None else ""
        lam = self.params_used.lam if self.params_used is not None else ""
        val = self.value
        return {
            "kind": self.kind,
            "inputs": ";".join(f"{k}={v}" for k, v in sorted(self.inputs.items())),
            "epsilon": eps,
            "lambda": lam,
            "log_value": self.log_value,
            "value": val if math.isfinite(val) else "",
        }


def _check_common(d, p, sigma):
    if int(d) != d or d < 1:
        raise DomainError(f"d must be a positive integer, got {d!r}")
    if not p > 0:
        raise DomainError(f"p must be positive, got {p!r}")
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma!r}")


# ---------------------------------------------------------------------------
# finite-moment condition
# ---------------------------------------------------------------------------

def select_params_thm4(d, p, sigma, s, m) -> KernelParams:
    """Kernel parameters for ``(E|X|^s)^{1/s} <= m`` with ``s > d + 2p``.

    ``eps = min(d + 2p, s - d - 2p)`` and ``lam = sqrt(d + 2p + eps) + sqrt2 m / sigma``.
    """
    _check_common(d, p, sigma)
    r = d + 2.0 * p
    if not s > r:
        raise DomainError(f"need s > d + 2p = {r}, got s={s!r}")
    if not m >= 0:
        raise DomainError(f"m must be nonnegative, got {m!r}")
    eps = min(r, s - r)
    lam = math.sqrt(r + eps) + math.sqrt(2.0) * m / sigma
    return KernelParams(d=d, p=p, sigma=sigma, epsilon=eps, lam=lam)


def log_kxx_ub_thm4(d, p, sigma, m, eps) -> float:
    """``log[(alpha/eps) (sqrt(2d + 2p + eps) + sqrt2 m / sigma)^{d+2p}]``."""
    _check_common(d, p, sigma)
    r = d + 2.0 * p
    if not 0 < eps <= r:
        raise DomainError(f"eps must lie in (0, {r}], got {eps!r}")
    if not m >= 0:
        raise DomainError(f"m must be nonnegative, got {m!r}")
    base = math.sqrt(2.0 * d + 2.0 * p + eps) + math.sqrt(2.0) * m / sigma
    return log_alpha_coeff(d, p) - math.log(eps) + r * math.log(base)


def kxx_ub_thm4(d, p, sigma, m, eps) -> float:
    return math.exp(log_kxx_ub_thm4(d, p, sigma, m, eps))


def log_got_rate_ub_thm1(d, p, sigma, s, m, n) -> float:
    """Explicit bound on ``E T_p^(sigma)(P, P_n)``.

    ``2^{max(p-1,0)} sigma^p sqrt(E k(X,X)) / sqrt(n)`` with ``E k(X,X)``
    replaced by its finite-moment bound at ``eps = min(d+2p, s-d-2p)``.
    """
    if not n >= 1:
        raise DomainError(f"n must be at least 1, got {n!r}")
    params = select_params_thm4(d, p, sigma, s, m)
    log_kxx = log_kxx_ub_thm4(d, p, sigma, m, params.epsilon)
    return (max(p - 1.0, 0.0) * math.log(2.0) + p * math.log(sigma)
            + 0.5 * log_kxx - 0.5 * math.log(n))


def got_rate_ub_thm1(d, p, sigma, s, m, n) -> float:
    return math.exp(log_got_rate_ub_thm1(d, p, sigma, s, m, n))


# ---------------------------------------------------------------------------
# sub-gamma condition
# ---------------------------------------------------------------------------

def log_moment_ub_thm5(d, s, v, b) -> float:
    """``log[sqrt(2e) (sqrt v + sqrt s b)^s M_d(s)]``, a bound on ``log E|X|^s``."""
    if not s >= 0:
        raise DomainError(f"s must be nonnegative, got {s!r}")
    if not v > 0 or not b >= 0:
        raise DomainError(f"need v > 0 and b >= 0, got v={v!r}, b={b!r}")
    base = math.sqrt(v) + math.sqrt(s) * b
    return 0.5 * math.log(2.0 * math.e) + s * math.log(base) + log_central_chi_moment(d, s)


def moment_ub_thm5(d, s, v, b) -> float:
    return math.exp(log_moment_ub_thm5(d, s, v, b))


def log_m_t_subgamma(d, p, sigma, v, b, t) -> float:
    """``log m(t)`` with ``m(t) = (sqrt(sigma^2 + 2v) + sqrt(r+t) b)^{r+t} Mbar_d(r+t)``.

    Defined for ``t`` in ``(-r, r]``, ``r = d + 2p``.
    """
    _check_common(d, p, sigma)
    r = d + 2.0 * p
    if not -r < t <= r:
        raise DomainError(f"t must lie in (-{r}, {r}], got {t!r}")
    if not v > 0 or not b >= 0:
        raise DomainError(f"need v > 0 and b >= 0, got v={v!r}, b={b!r}")
    base = math.sqrt(sigma * sigma + 2.0 * v) + math.sqrt(r + t) * b
    return (r + t) * math.log(base) + log_mbar(d, r + t)


def m_t_subgamma(d, p, sigma, v, b, t) -> float:
    return math.exp(log_m_t_subgamma(d, p, sigma, v, b, t))


def select_params_thm6(d, p, sigma, v, b, sigma_normalized: bool = True) -> KernelParams:
    """``eps = sqrt(d)`` and ``lam = (m(eps) / m(-eps))^{1/(2 eps)} / sigma``, in log space.

    The moments entering ``E k(X,X)`` are those of ``Y = (sqrt2/sigma) X + Z``,
    and ``E|Y|^{r+t}`` scales like ``m(t) / sigma^{r+t}``; balancing the two
    terms of ``J`` therefore needs the ``1/sigma``.  ``sigma_normalized=False``
    drops it (the two rules agree at ``sigma = 1``), but then ``E k(X,X)`` can
    exceed :func:`kxx_ub_thm6` for ``sigma > 1``.
    """
    eps = math.sqrt(d)
    r = d + 2.0 * p
    eps = min(eps, r)
    log_lam = (log_m_t_subgamma(d, p, sigma, v, b, eps)
               - log_m_t_subgamma(d, p, sigma, v, b, -eps)) / (2.0 * eps)
    if sigma_normalized:
        log_lam -= math.log(sigma)
    return KernelParams(d=d, p=p, sigma=sigma, epsilon=eps, lam=math.exp(log_lam))


def log_kxx_ub_thm6(d, p, sigma, v, b) -> float:
    """``log[C (d+p)^p (sqrt(1 + 2v/sigma^2) + sqrt(d+2p) b / sigma)^{d+2p}]``, ``C = sqrt(2 pi) e^{7/8}``."""
    _check_common(d, p, sigma)
    if not v > 0 or not b >= 0:
        raise DomainError(f"need v > 0 and b >= 0, got v={v!r}, b={b!r}")
    r = d + 2.0 * p
    base = math.sqrt(1.0 + 2.0 * v / sigma**2) + math.sqrt(r) * b / sigma
    return math.log(THM6_CONSTANT) + p * math.log(d + p) + r * math.log(base)


def kxx_ub_thm6(d, p, sigma, v, b) -> float:
    return math.exp(log_kxx_ub_thm6(d, p, sigma, v, b))


def log_kxx_lb_example1(d, p, sigma, b, eps) -> float:
    """Lower bound on ``log E k(X,X)`` for the scale mixture ``X = sqrt(U) Z``.

    ``(alpha/eps) (sqrt2 b/sigma)^r sqrt(M_{1/b^2}(r-eps) M_{1/b^2}(r+eps)) sqrt(M_d(r-eps) M_d(r+eps))``,
    valid for any ``lam``.
    """
    _check_common(d, p, sigma)
    if not b > 0:
        raise DomainError(f"b must be positive, got {b!r}")
    r = d + 2.0 * p
    if not 0 < eps <= r:
        raise DomainError(f"eps must lie in (0, {r}], got {eps!r}")
    nu = 1.0 / (b * b)
    if not r - eps > max(-nu, -d):
        raise DomainError("the moments of order r - eps do not exist")
    return (log_alpha_coeff(d, p) - math.log(eps) + r * math.log(math.sqrt(2.0) * b / sigma)
            + 0.5 * (log_central_chi_moment(nu, r - eps) + log_central_chi_moment(nu, r + eps))
            + 0.5 * (log_central_chi_moment(d, r - eps) + log_central_chi_moment(d, r + eps)))


def kxx_lb_example1(d, p, sigma, b, eps) -> float:
    return math.exp(log_kxx_lb_example1(d, p, sigma, b, eps))


def phase_transition_asymptote(v, sigma) -> float:
    """Plateau ``(1/2) log(1 + 2v/sigma^2)`` of ``(1/d) log E k(X,X)`` when ``b = O(d^-delta)``, ``delta > 1/2``."""
    if not sigma > 0 or not v >= 0:
        raise DomainError(f"need sigma > 0 and v >= 0, got sigma={sigma!r}, v={v!r}")
    return 0.5 * math.log1p(2.0 * v / sigma**2)


# ---------------------------------------------------------------------------
# dependent samples
# ---------------------------------------------------------------------------

def dependent_ub_design(alphas, C_kP, n=None) -> float:
    """``C (1/n + n^-2 sum_{i != j} |<alpha_i, alpha_j>|)`` for a given design."""
    A = np.asarray(alphas, dtype=float)
    if A.ndim != 2:
        raise ValueError("alphas must be an (n, N) array")
    if not np.allclose(np.linalg.norm(A, axis=1), 1.0, rtol=0.0, atol=1e-12):
        raise DomainError("every alpha must have unit norm (within 1e-12)")
    if n is not None and n != A.shape[0]:
        raise ValueError(f"n={n} does not match the design's {A.shape[0]} rows")
    if not C_kP >= 0:
        raise DomainError(f"C_kP must be nonnegative, got {C_kP!r}")
    n = A.shape[0]
    G = np.abs(A @ A.T)
    off = math.fsum(G.ravel()) - math.fsum(np.diag(G))
    return C_kP * (1.0 / n + off / n**2)


def dependent_ub_random(N, n, C_kP) -> float:
    """High-probability bound ``C (1/n + sqrt(log N / N))`` for uniformly random designs."""
    if not N >= 2:
        raise DomainError(f"N must be at least 2, got {N!r}")
    if not n >= 1:
        raise DomainError(f"n must be at least 1, got {n!r}")
    if not C_kP >= 0:
        raise DomainError(f"C_kP must be nonnegative, got {C_kP!r}")
    return C_kP * (1.0 / n + math.sqrt(math.log(N) / N))


def hellinger_r_bound(C_kP2, d_H) -> float:
    """``r_ij <= sqrt2 C d_H(Q_ij, P x P)`` where ``C`` bounds ``E[k^2(X,X)]^{1/2}``."""
    if not C_kP2 >= 0:
        raise DomainError(f"C_kP2 must be nonnegative, got {C_kP2!r}")
    if not 0 <= d_H <= math.sqrt(2.0) + 1e-15:
        raise DomainError(f"d_H must lie in [0, sqrt2], got {d_H!r}")
    return math.sqrt(2.0) * C_kP2 * d_H


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def report(kind: str, **inputs) -> BoundReport:
    """Evaluate the bound named ``kind`` and bundle it with its kernel parameters.

    ``thm4_kxx_ub`` and ``thm1_rate`` take ``d, p, sigma, s, m`` (plus ``n``);
    ``thm6_kxx_ub`` takes ``d, p, sigma, v, b``; ``example1_kxx_lb`` takes
    ``d, p, sigma, b`` and optionally ``eps`` (default ``sqrt d``);
    ``thm5_moment_ub`` takes ``d, s, v, b``; the dependent bounds take the
    arguments of their functions.
    """
    params = None
    if kind == "thm4_kxx_ub":
        params = select_params_thm4(inputs["d"], inputs["p"], inputs["sigma"], inputs["s"], inputs["m"])
        lv = log_kxx_ub_thm4(inputs["d"], inputs["p"], inputs["sigma"], inputs["m"], params.epsilon)
    elif kind == "thm1_rate":
        params = select_params_thm4(inputs["d"], inputs["p"], inputs["sigma"], inputs["s"], inputs["m"])
        lv = log_got_rate_ub_thm1(**{k: inputs[k] for k in ("d", "p", "sigma", "s", "m", "n")})
    elif kind == "thm5_moment_ub":
        lv = log_moment_ub_thm5(inputs["d"], inputs["s"], inputs["v"], inputs["b"])
    elif kind == "thm6_kxx_ub":
        params = select_params_thm6(inputs["d"], inputs["p"], inputs["sigma"], inputs["v"], inputs["b"])
        lv = log_kxx_ub_thm6(inputs["d"], inputs["p"], inputs["sigma"], inputs["v"], inputs["b"])
    elif kind == "example1_kxx_lb":
        d, p, sigma, b = inputs["d"], inputs["p"], inputs["sigma"], inputs["b"]
        eps = inputs.get("eps", min(math.sqrt(d), d + 2.0 * p))
        params = KernelParams(d=d, p=p, sigma=sigma, epsilon=eps, lam=inputs.get("lam", 1.0))
        lv = log_kxx_lb_example1(d, p, sigma, b, eps)
    elif kind == "dep_eq17":
        lv = math.log(dependent_ub_design(inputs["alphas"], inputs["C_kP"]))
        inputs = {"n": len(inputs["alphas"]), "C_kP": inputs["C_kP"]}
    elif kind == "dep_eq18":
        lv = math.log(dependent_ub_random(inputs["N"], inputs["n"], inputs["C_kP"]))
    else:
        raise ValueError(f"unknown bound kind {kind!r}")
    return BoundReport(kind=kind, log_value=lv, params_used=params, inputs=dict(inputs))
