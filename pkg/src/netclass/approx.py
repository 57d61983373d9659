"""Gaussian approximation of the interactive protocol's stopping time."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import DyadicRational, ProblemConfig, gamma as config_gamma

K_MAX = 64
TERM_FLOOR = 1e-15
_SQRT2 = math.sqrt(2.0)
_HALF_SQRT_PI = math.sqrt(math.pi) / 2

BRANCH_BALANCED = "gamma=0"
BRANCH_KAPPA = "0<gamma<=1/4"
BRANCH_FLAT = "1/4<gamma<=1/2"

__all__ = [
    "ApproxReport",
    "CltParams",
    "a_bound",
    "a_term",
    "approx_from_gamma",
    "approx_mean_stop",
    "clt_params",
    "erf",
    "kappa",
    "sigma",
]


def erf(x: float) -> float:
    """Error function (libm; absolute error well below 1e-12)."""
    return math.erf(x)


@dataclass(frozen=True)
class CltParams:
    """Limiting moments of ``Z(j) / sqrt(n)``."""

    j: int
    mean: float
    variance: float
    sigma_unscaled: float


def sigma(n: int, k: int) -> float:
    """Standard deviation of ``Z(k)``: ``sqrt(n (1 - 4**-k) / 12)``."""
    return math.sqrt(n * (1.0 - 4.0**-k) / 12.0)


def clt_params(config: ProblemConfig, j: int) -> CltParams:
    if j < 1:
        raise ValueError("round index must be >= 1")
    n = config.n
    beta = config.m / n
    return CltParams(
        j=j,
        mean=math.sqrt(n) * (beta - 0.5) * (1.0 - 2.0**-j),
        variance=(1.0 - 4.0**-j) / 12.0,
        sigma_unscaled=sigma(n, j),
    )


def a_term(n: int, k: int, gamma: float) -> float:
    """Gaussian estimate of ``Pr[L(k) < Z(k) < U(k)]``."""
    if n < 2 or k < 1:
        raise ValueError(f"need n >= 2 and k >= 1, got n={n}, k={k}")
    scale = n / (_SQRT2 * sigma(n, k))
    half = 2.0 ** -(k + 1)
    return 0.5 * (erf((gamma + half) * scale) - erf((gamma - half) * scale))


def kappa(n: int, gamma: float, k_max: int = K_MAX) -> int:
    """Largest ``k`` with ``(gamma - 2**-(k+1)) n / (sqrt(2) sigma_k) <= -sqrt(pi)/2``; 0 if none."""
    best = 0
    for k in range(1, k_max + 1):
        if (gamma - 2.0 ** -(k + 1)) * n / (_SQRT2 * sigma(n, k)) <= -_HALF_SQRT_PI:
            best = k
    return best


def a_bound(n: int, gamma: float) -> tuple[float, str]:
    """Closed-form asymptotic sum of the tail terms, ``o(1)`` terms dropped.

    This is the large-``n`` limit expression, not a certified bound at finite
    ``n``. ``gamma`` must already be folded into ``[0, 1/2]``.
    """
    if not 0.0 <= gamma <= 0.5:
        raise ValueError(f"gamma={gamma} outside [0, 1/2]; fold negative gamma by symmetry first")
    if gamma == 0.0:
        value = 0.5 * math.log2(6 * n / math.pi + 1) + math.sqrt(3 / (1 + math.pi / (6 * n)))
        return value, BRANCH_BALANCED
    if gamma <= 0.25:
        return 1.0 + kappa(n, gamma), BRANCH_KAPPA
    return 1.0, BRANCH_FLAT


@dataclass(frozen=True)
class ApproxReport:
    n: int
    gamma: float
    terms: tuple[float, ...]
    bound: float
    branch: str
    approx_Tbar: float
    kappa: int | None = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "gamma": self.gamma,
            "branch": self.branch,
            "bound": self.bound,
            "kappa": self.kappa,
            "approx_Tbar": self.approx_Tbar,
            "terms": list(self.terms),
        }


def approx_from_gamma(n: int, gamma: float, k_max: int = K_MAX, *, balanced: bool | None = None) -> ApproxReport:
    """Approximate mean stopping time from ``(n, gamma)`` alone.

    ``balanced`` overrides the float test ``gamma == 0`` when the caller knows
    the exact value (floating-point ``a/n + 1/2 - m/n`` can miss zero).
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    g = abs(gamma)
    if balanced is True:
        g = 0.0
    terms = []
    for k in range(1, k_max + 1):
        t = a_term(n, k, g)
        if t < TERM_FLOOR:
            break
        terms.append(t)
    bound, branch = a_bound(n, g)
    return ApproxReport(
        n=n,
        gamma=g,
        terms=tuple(terms),
        bound=bound,
        branch=branch,
        approx_Tbar=1.0 + math.fsum(terms),
        kappa=kappa(n, g) if branch == BRANCH_KAPPA else None,
    )


def approx_mean_stop(n: int, m: int, a: int | DyadicRational, k_max: int = K_MAX) -> ApproxReport:
    """Gaussian-approximate mean stopping time ``1 + sum_k A(n, k, gamma)``.

    Negative gamma is folded by the label-swap symmetry ``(m, a) -> (n-m, -a)``.
    """
    config = ProblemConfig(n, m, a)
    exact_zero = config.a * 2 + n - 2 * m == 0
    return approx_from_gamma(n, config_gamma(config), k_max, balanced=exact_zero)
