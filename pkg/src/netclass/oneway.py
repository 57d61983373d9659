"""One-Way and One-Way+ protocols with uniform scalar quantizers.

Every sensor sends the index of its bin ``floor(X_i M)``; the leader
reconstructs each input at its bin midpoint and applies the classifier. The
``+`` variant spends ``n`` more bits returning the label to the sensors.

Error analysis works on the all-positive form obtained by replacing ``X_i``
with ``1 - X_i`` on negative-weight nodes, which moves the threshold to
``a' = a + (n - m)``. A cell with index sum ``S`` straddles the hyperplane iff
``a' M - n <= S < a' M``; only those cells can be misclassified.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .interactive import exact_label_batch
from .model import FRACTION_BITS, ClassLabel, DyadicRational, ProblemConfig
from .montecarlo import STREAM_ONEWAY, SeedSpec, map_blocks, wilson_interval

MAX_EXACT_N = 30
VARIANTS = ("one_way", "one_way_plus")

__all__ = [
    "MAX_EXACT_N",
    "MCProportion",
    "OneWayResult",
    "QuantizerSpec",
    "TrivialClassificationWarning",
    "UnsupportedRegime",
    "boundary_cell_prob",
    "cell_sum_count",
    "decide_label",
    "rate_floor",
    "evaluate",
    "pe_exact",
    "pe_mc",
    "plan_rate",
    "predicted_pe",
    "quantize",
    "quantize_batch",
]


class UnsupportedRegime(ValueError):
    """The exact error computation is not offered for this size."""


class TrivialClassificationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class QuantizerSpec:
    M: int

    def __post_init__(self) -> None:
        if self.M < 1:
            raise ValueError(f"need at least one bin, got M={self.M}")

    @property
    def delta(self) -> Fraction:
        return Fraction(1, self.M)

    @property
    def per_node_bits(self) -> float:
        return math.log2(self.M)

    @property
    def per_node_bits_ceil(self) -> int:
        return (self.M - 1).bit_length()


def quantize(x: int, M: int) -> int:
    """Bin index ``floor(x M / 2**64)`` of a fixed-point input."""
    return (x * M) >> FRACTION_BITS


def quantize_batch(inputs: np.ndarray, M: int) -> np.ndarray:
    """Vectorized :func:`quantize`; exact for ``M < 2**32``."""
    if not 1 <= M < 1 << 32:
        raise ValueError("batch quantizer needs 1 <= M < 2**32")
    inputs = np.asarray(inputs, dtype=np.uint64)
    mask = np.uint64(0xFFFFFFFF)
    hi = (inputs >> np.uint64(32)) * np.uint64(M)
    lo = (inputs & mask) * np.uint64(M)
    return ((hi + (lo >> np.uint64(32))) >> np.uint64(32)).astype(np.int64)


def decide_label(config: ProblemConfig, bins: Sequence[int], M: int) -> ClassLabel:
    """Midpoint reconstruction, then the classifier (ties go to 1)."""
    if len(bins) != config.n:
        raise ValueError(f"expected {config.n} bin indices, got {len(bins)}")
    m = config.m
    # sum of (2 l_i + 1) with signs equals 2 M times the reconstructed signed sum
    odd = sum(2 * l + 1 for l in bins[:m]) - sum(2 * l + 1 for l in bins[m:])
    return ClassLabel(int(Fraction(odd, 2 * M) >= config.a.to_fraction()))


def _decide_batch(config: ProblemConfig, bins: np.ndarray, M: int) -> np.ndarray:
    odd = 2 * bins + 1
    m = config.m
    lhs = odd[:, :m].sum(axis=1) - odd[:, m:].sum(axis=1)
    a = config.a
    # lhs >= 2 M a  <=>  lhs >= ceil(2 M num / 2**e)
    rhs = -((-2 * M * a.numerator) >> a.exponent)
    return (lhs >= rhs).astype(np.int64)


def cell_sum_count(n: int, M: int, s: int) -> int:
    """Number of index vectors in ``{0..M-1}**n`` summing to ``s``."""
    if s < 0 or s > n * (M - 1):
        return 0
    total = 0
    for k in range(min(n, s // M) + 1):
        term = math.comb(n, k) * math.comb(s - k * M + n - 1, n - 1)
        total += -term if k & 1 else term
    return total


def _cumulative_count(n: int, M: int, x: int) -> int:
    """Number of index vectors with sum ``<= x`` (hockey-stick telescoping)."""
    if x < 0:
        return 0
    total = 0
    for k in range(min(n, x // M) + 1):
        term = math.comb(n, k) * math.comb(x - k * M + n, n)
        total += -term if k & 1 else term
    return total


def _transformed_threshold(config: ProblemConfig) -> Fraction:
    return (config.a + config.n_minus).to_fraction()


def _window(n: int, M: int, a_t: Fraction) -> range:
    lo = math.ceil(a_t * M - n)
    hi = math.ceil(a_t * M) - 1
    return range(max(lo, 0), min(hi, n * (M - 1)) + 1)


def _as_fraction(value: int | Fraction | DyadicRational) -> Fraction:
    if isinstance(value, DyadicRational):
        return value.to_fraction()
    return Fraction(value)


def boundary_cell_prob(n: int, M: int, a_transformed: int | Fraction | DyadicRational) -> float:
    """Probability that the cell of ``X`` straddles ``sum_i X_i = a_transformed``."""
    a_t = _as_fraction(a_transformed)
    if not 0 < a_t < n:
        warnings.warn(
            f"threshold {a_t} outside (0, {n}): classification is trivial",
            TrivialClassificationWarning,
            stacklevel=2,
        )
        return 0.0
    window = _window(n, M, a_t)
    if not window:
        return 0.0
    hits = _cumulative_count(n, M, window[-1]) - _cumulative_count(n, M, window[0] - 1)
    return float(Fraction(hits, M**n))


def _irwin_hall_cdf(n: int, t: Fraction) -> Fraction:
    if t <= 0:
        return Fraction(0)
    if t >= n:
        return Fraction(1)
    total = Fraction(0)
    for k in range(math.floor(t) + 1):
        term = math.comb(n, k) * (t - k) ** n
        total += -term if k & 1 else term
    return total / math.factorial(n)


def pe_exact_fraction(config: ProblemConfig, M: int) -> Fraction:
    """Exact ``Pr[f(X) != g(X)]`` as a rational number."""
    n = config.n
    if n > MAX_EXACT_N:
        raise UnsupportedRegime(f"exact error probability is limited to n <= {MAX_EXACT_N}; use pe_mc")
    if M < 1:
        raise ValueError("M must be >= 1")
    a_t = _transformed_threshold(config)
    half = Fraction(n, 2)
    total = Fraction(0)
    for s in _window(n, M, a_t):
        t = a_t * M - s
        cdf = _irwin_hall_cdf(n, t)
        wrong = cdf if t <= half else 1 - cdf
        total += cell_sum_count(n, M, s) * wrong
    return total / M**n


def pe_exact(config: ProblemConfig, M: int) -> float:
    return float(pe_exact_fraction(config, M))


@dataclass(frozen=True)
class MCProportion:
    errors: int
    reps: int
    ci: tuple[float, float]
    seed: int

    @property
    def p(self) -> float:
        return self.errors / self.reps

    @property
    def stderr(self) -> float:
        p = self.p
        return math.sqrt(p * (1 - p) / self.reps)

    def to_dict(self) -> dict:
        return {"p": self.p, "errors": self.errors, "reps": self.reps, "ci_lo": self.ci[0], "ci_hi": self.ci[1], "seed": self.seed}


def pe_mc(config: ProblemConfig, M: int, reps: int, seed: int, workers: int | None = None) -> MCProportion:
    """Monte Carlo error rate of the midpoint rule, with a Wilson 95% interval."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    spec = SeedSpec(seed, STREAM_ONEWAY)

    def run(block: int, start: int, stop: int) -> int:
        x = spec.inputs(config.n, start, stop)
        g = _decide_batch(config, quantize_batch(x, M), M)
        f = exact_label_batch(config, x)
        return int(np.count_nonzero(f != g))

    errors = sum(map_blocks(run, reps, workers))
    return MCProportion(errors, reps, wilson_interval(errors, reps), seed)


def rate_floor(n: int, pe_target: float) -> float:
    """Closed-form One-Way+ sum rate floor for the balanced case."""
    return n * (math.log2(1 / pe_target) + 0.5 * math.log2(12 * n / math.pi) + 1)


def predicted_pe(n: int, M: int, gamma: float = 0.0) -> float:
    """Large-``n`` error estimate used by the planner.

    Balanced case: the linear bound ``sqrt(12n / (pi (M^2 - 1)))`` on
    ``(1/2) erf(sqrt(12n / (M^2 - 1)))``, the closed form behind the rate
    floor. Otherwise the Gaussian probability of the boundary-cell window,
    whose centre sits ``M gamma s`` standard deviations from the mean of the
    index sum; since errors only happen in boundary cells this bounds Pe.
    """
    if M <= 1:
        return 1.0
    s = math.sqrt(12 * n / (M * M - 1))
    if gamma == 0.0:
        return min(1.0, s / math.sqrt(math.pi))
    r = s / math.sqrt(2)
    return 0.5 * (math.erf((M * gamma + 0.5) * r) - math.erf((M * gamma - 0.5) * r))


@dataclass(frozen=True)
class OneWayResult:
    config: ProblemConfig
    quantizer: QuantizerSpec
    variant: str
    sum_rate_bits: float
    sum_rate_bits_ceil: int
    pe_exact: float | None
    pe_mc: MCProportion | None
    boundary_prob: float
    predicted_pe: float
    rate_floor_bits: float | None = None
    pe_target: float | None = None

    def to_dict(self) -> dict:
        return {
            "config": str(self.config),
            "n": self.config.n,
            "m": self.config.m,
            "a": str(self.config.a),
            "M": self.quantizer.M,
            "delta": float(self.quantizer.delta),
            "per_node_bits": self.quantizer.per_node_bits,
            "variant": self.variant,
            "sum_rate_bits": self.sum_rate_bits,
            "sum_rate_bits_ceil": self.sum_rate_bits_ceil,
            "pe_target": self.pe_target,
            "predicted_pe": self.predicted_pe,
            "pe_exact": self.pe_exact,
            "pe_mc": None if self.pe_mc is None else self.pe_mc.to_dict(),
            "boundary_prob": self.boundary_prob,
            "rate_floor_bits": self.rate_floor_bits,
        }


def _rates(n: int, q: QuantizerSpec, variant: str) -> tuple[float, int]:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    extra = 1 if variant == "one_way_plus" else 0
    return n * (q.per_node_bits + extra), n * (q.per_node_bits_ceil + extra)


def _balanced(config: ProblemConfig) -> bool:
    return config.a * 2 + config.n - 2 * config.m == 0


def _gamma(config: ProblemConfig) -> float:
    return float(config.a) / config.n + 0.5 - config.m / config.n


def evaluate(
    config: ProblemConfig,
    M: int,
    variant: str = "one_way_plus",
    reps: int = 0,
    seed: int = 0,
    workers: int | None = None,
    pe_target: float | None = None,
) -> OneWayResult:
    """All figures of merit for one quantizer resolution."""
    q = QuantizerSpec(M)
    rate, rate_ceil = _rates(config.n, q, variant)
    exact = pe_exact(config, M) if config.n <= MAX_EXACT_N else None
    boundary = boundary_cell_prob(config.n, M, _transformed_threshold(config))
    balanced = _balanced(config)
    return OneWayResult(
        config=config,
        quantizer=q,
        variant=variant,
        sum_rate_bits=rate,
        sum_rate_bits_ceil=rate_ceil,
        pe_exact=exact,
        pe_mc=pe_mc(config, M, reps, seed, workers) if reps > 0 else None,
        boundary_prob=boundary,
        predicted_pe=predicted_pe(config.n, M, 0.0 if balanced else abs(_gamma(config))),
        rate_floor_bits=rate_floor(config.n, pe_target) if balanced and pe_target else None,
        pe_target=pe_target,
    )


def _smallest_m(n: int, pe_target: float, gamma: float) -> int:
    if gamma == 0.0:
        guess = max(1, math.ceil(math.sqrt(1 + 12 * n / (math.pi * pe_target**2))))
        while guess > 1 and predicted_pe(n, guess - 1) <= pe_target:
            guess -= 1
        while predicted_pe(n, guess) > pe_target:
            guess += 1
        return guess
    hi = 1
    while predicted_pe(n, hi, gamma) > pe_target:
        hi *= 2
        if hi > 1 << 62:
            raise ValueError(f"no resolution reaches pe_target={pe_target}")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if predicted_pe(n, mid, gamma) <= pe_target:
            hi = mid
        else:
            lo = mid
    return hi


def plan_rate(
    n: int,
    m: int,
    a: int | DyadicRational,
    pe_target: float,
    variant: str = "one_way_plus",
    reps: int = 0,
    seed: int = 0,
    workers: int | None = None,
) -> tuple[int, OneWayResult]:
    """Smallest bin count whose predicted error meets ``pe_target``."""
    if not 0 < pe_target < 1:
        raise ValueError("pe_target must lie in (0, 1)")
    config = ProblemConfig(n, m, a)
    g = 0.0 if _balanced(config) else abs(_gamma(config))
    M = _smallest_m(n, pe_target, g)
    return M, evaluate(config, M, variant, reps, seed, workers, pe_target)
