"""Entropy lower bounds on the sum rate of zero-error protocols."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import entropy as _entropy

from .model import ProblemConfig

GOLDEN_TOL = 1e-10
TERNARY_TOL = 1e-12

__all__ = [
    "PartitionEntropyReport",
    "RectangleBound",
    "entropy_bits",
    "tail_entropy_bound",
    "max_rectangle_prob",
    "minimize_entropy_ratio",
    "partition_entropy_report",
    "sum_rate_lower_bound_n2",
    "ternary_entropy_ratio",
]


def entropy_bits(probs: Sequence[float]) -> float:
    """Shannon entropy in bits with ``0 log 0 = 0``; no renormalization."""
    p = np.asarray(probs, dtype=np.float64)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def ternary_entropy_ratio(v: float) -> float:
    """``H([v^2, 2v(1-v), (1-v)^2]) / (2v(1-v))`` in bits."""
    if not 0.0 < v < 1.0:
        raise ValueError(f"v must lie strictly inside (0, 1), got {v}")
    w = 1.0 - v
    return float(_entropy([v * v, 2 * v * w, w * w], base=2)) / (2 * v * w)


def minimize_entropy_ratio(lo: float = 0.0, hi: float = 1.0, tol: float = GOLDEN_TOL) -> tuple[float, float]:
    """Golden-section search for the minimizer of :func:`ternary_entropy_ratio`."""
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = ternary_entropy_ratio(c), ternary_entropy_ratio(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = ternary_entropy_ratio(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = ternary_entropy_ratio(d)
    v = (a + b) / 2
    return v, ternary_entropy_ratio(v)


def sum_rate_lower_bound_n2() -> float:
    """Four bits for ``n=2, m=1, a=0``: one bit for the class plus the 3-bit minimum."""
    class_entropy = 1.0  # the two classes are equiprobable triangles
    _, conditional = minimize_entropy_ratio()
    return class_entropy + conditional


@dataclass(frozen=True)
class PartitionEntropyReport:
    v_star: float
    conditional_entropy_bits: float
    total_bound_bits: float
    curve: tuple[tuple[float, float], ...]

    def to_dict(self) -> dict:
        return {
            "v_star": self.v_star,
            "conditional_entropy_bits": self.conditional_entropy_bits,
            "total_bound_bits": self.total_bound_bits,
            "curve": [list(p) for p in self.curve],
        }


def partition_entropy_report(samples: int = 99) -> PartitionEntropyReport:
    v_star, best = minimize_entropy_ratio()
    grid = np.linspace(0.0, 1.0, samples + 2)[1:-1]
    curve = tuple((float(v), ternary_entropy_ratio(float(v))) for v in grid)
    return PartitionEntropyReport(v_star, best, 1.0 + best, curve)


@dataclass(frozen=True)
class RectangleBound:
    config: ProblemConfig
    p1: float
    entropy_floor_bits: float
    maximizer: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "p1": self.p1,
            "entropy_floor_bits": self.entropy_floor_bits,
            "u": self.maximizer[0],
            "w": self.maximizer[1],
        }


def _ternary_max(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    while hi - lo > tol:
        third = (hi - lo) / 3
        m1, m2 = lo + third, hi - third
        if f(m1) < f(m2):
            lo = m1
        else:
            hi = m2
    return (lo + hi) / 2


def max_rectangle_prob(config: ProblemConfig, tol: float = TERNARY_TOL) -> RectangleBound:
    """Largest ``prod_{H+}(1 - x_i) prod_{H-} x_i`` on the hyperplane ``X_s = a``.

    The maximizer is taken symmetric within each weight group (``u`` on the
    positive nodes, ``w`` on the negative ones), leaving a concave 1-D problem
    in log space on the feasible segment of ``m u - (n - m) w = a``.
    """
    n, m, nm = config.n, config.m, config.n_minus
    a = float(config.a)

    def log_obj(u: float, w: float) -> float:
        total = 0.0
        if m:
            if u >= 1.0:
                return -math.inf
            total += m * math.log1p(-u)
        if nm:
            if w <= 0.0:
                return -math.inf
            total += nm * math.log(w)
        return total

    if m and nm:
        # w = (m u - a) / (n - m) must stay in [0, 1]
        lo = max(0.0, a / m)
        hi = min(1.0, (a + nm) / m)
        if lo > hi:
            raise ValueError(f"no feasible rectangle corner for {config}")
        u = _ternary_max(lambda t: log_obj(t, (m * t - a) / nm), lo, hi, tol)
        w = (m * u - a) / nm
    elif m:
        u, w = a / m, 0.0
    else:
        u, w = 0.0, -a / nm
    if not (0.0 <= u <= 1.0 and 0.0 <= w <= 1.0):
        raise ValueError(f"no feasible rectangle corner for {config}")
    log_p1 = log_obj(u, w)
    p1 = math.exp(log_p1)
    return RectangleBound(config, p1, -log_p1 / math.log(2), (u, w))


def tail_entropy_bound(
    probs: Sequence[float], g: Callable[[int], float] | Sequence[float], cut: int
) -> float:
    """Entropy lower bound from a tail bound ``g(k) <= sum_{i>=k} p_i``.

    ``probs`` must be non-increasing; ``g`` is a callable or a sequence with
    ``g[0]`` holding ``g(1)``. Returns
    ``sum_{i<cut} p_i log2(1/p_i) + g(cut) log2(cut / (1 - g(cut+1)))``.
    """
    if cut < 1:
        raise ValueError("cut must be >= 1")
    p = np.asarray(probs, dtype=np.float64)
    if np.any(np.diff(p) > 0):
        raise ValueError("probabilities must be in non-increasing order")
    if p.sum() > 1 + 1e-12:
        raise ValueError("probabilities sum to more than 1")
    gf = g if callable(g) else (lambda k: g[k - 1])
    g_cut, g_next = float(gf(cut)), float(gf(cut + 1))
    if g_next >= 1.0:
        raise ValueError("g(cut+1) >= 1 makes the bound diverge")
    head = entropy_bits(p[: cut - 1])
    return head + g_cut * math.log2(cut / (1.0 - g_next))
