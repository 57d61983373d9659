"""Exact mean stopping times for integer thresholds.

With an integer threshold the recursive protocol is a Markov chain on the
interior thresholds ``-(n-m)+1 .. m-1``; the mean stopping times solve
``(I - Q) T = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .interactive import sum_rate_per_round

RESIDUAL_TOL = 1e-9

__all__ = [
    "BDistribution",
    "NumericalError",
    "StoppingTimeTable",
    "TransitionMatrix",
    "b_pmf",
    "build_Q",
    "mean_sum_rate_exact",
    "solve_mean_stop",
]


class NumericalError(ArithmeticError):
    """A computed result failed its accuracy check."""


def _check_nm(n: int, m: int) -> None:
    if n < 2 or not 0 <= m <= n:
        raise ValueError(f"need n >= 2 and 0 <= m <= n, got n={n}, m={m}")


@dataclass(frozen=True)
class BDistribution:
    """Law of the per-round signed bit sum ``B`` on ``-(n-m) .. m``."""

    n: int
    m: int
    pmf: Mapping[int, float]

    def __call__(self, k: int) -> float:
        return self.pmf.get(k, 0.0)

    @property
    def support(self) -> range:
        return range(-(self.n - self.m), self.m + 1)


def b_pmf(n: int, m: int, exact: bool = False) -> BDistribution:
    """``Pr[B = k] = C(n, k + n - m) / 2**n``.

    The binomial coefficient is exact and the single division by ``2**n`` is
    correctly rounded, so no recurrence or log-space detour is needed. With
    ``exact=True`` the values are Fractions.
    """
    _check_nm(n, m)
    den = 1 << n
    if exact:
        pmf = {k: Fraction(math.comb(n, k + n - m), den) for k in range(-(n - m), m + 1)}
    else:
        pmf = {k: math.comb(n, k + n - m) / den for k in range(-(n - m), m + 1)}
    return BDistribution(n, m, pmf)


@dataclass(frozen=True)
class TransitionMatrix:
    """Substochastic transitions between continuing thresholds.

    Rows and columns are indexed by the threshold value via :meth:`index`.
    """

    n: int
    m: int
    states: tuple[int, ...]
    Q: np.ndarray

    def index(self, a: int) -> int:
        lo = self.states[0] if self.states else 0
        if not self.states or not lo <= a <= self.states[-1]:
            raise KeyError(a)
        return a - lo

    def __getitem__(self, key: tuple[int, int]) -> float:
        a, a2 = key
        return float(self.Q[self.index(a), self.index(a2)])


def build_Q(n: int, m: int) -> TransitionMatrix:
    """``Q[a, a'] = Pr[B = 2a - a']`` over the interior thresholds."""
    dist = b_pmf(n, m)
    states = tuple(range(-(n - m) + 1, m))
    size = len(states)
    q = np.zeros((size, size))
    for i, a in enumerate(states):
        for k, a2 in enumerate(states):
            q[i, k] = dist(2 * a - a2)
    q.setflags(write=False)
    return TransitionMatrix(n, m, states, q)


@dataclass(frozen=True)
class StoppingTimeTable:
    n: int
    m: int
    tbar: Mapping[int, float]
    residual: float

    def __getitem__(self, a: int) -> float:
        return self.tbar[a]

    @property
    def states(self) -> tuple[int, ...]:
        return tuple(self.tbar)


def solve_mean_stop(n: int, m: int) -> StoppingTimeTable:
    """Solve ``(I - Q) T = 1`` (LU with partial pivoting) and verify the residual."""
    tm = build_Q(n, m)
    size = len(tm.states)
    if size == 0:
        return StoppingTimeTable(n, m, {}, 0.0)
    lhs = np.eye(size) - tm.Q
    rhs = np.ones(size)
    try:
        tbar = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"I - Q is singular for n={n}, m={m}") from exc
    residual = float(np.max(np.abs(lhs @ tbar - rhs)))
    if not residual <= RESIDUAL_TOL:
        raise NumericalError(f"residual {residual:.3e} exceeds {RESIDUAL_TOL} for n={n}, m={m}")
    if np.any(tbar < 1.0 - RESIDUAL_TOL):
        raise NumericalError(f"mean stopping time below 1 for n={n}, m={m}")
    return StoppingTimeTable(n, m, dict(zip(tm.states, tbar.tolist())), residual)


def mean_sum_rate_exact(n: int, m: int, a: int, downlink: str = "log3") -> float:
    """Expected bits per session at integer threshold ``a``."""
    if isinstance(a, bool) or not isinstance(a, int) or not -(n - m) < a < m:
        raise ValueError(f"threshold {a!r} is not an interior integer state for n={n}, m={m}")
    return sum_rate_per_round(n, downlink) * solve_mean_stop(n, m)[a]
