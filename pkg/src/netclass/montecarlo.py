"""Deterministic Monte Carlo harness.

Trials are grouped in fixed blocks of ``BLOCK_SIZE``. Block ``b`` draws from a
Philox stream keyed by ``(master_seed, stream)`` with counter ``b`` in the
high word, so trial ``i`` sees the same numbers however the blocks are spread
over workers. Per-block statistics are merged in block order, which makes the
result bit-identical for any worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from .interactive import (
    DOWNLINK_MODES,
    band_indicator,
    simulate_batch,
    sum_rate_per_round,
)
from .model import FRACTION_BITS, InputVector, ProblemConfig

BLOCK_SIZE = 1024
STREAM_SESSIONS = 0
STREAM_BAND = 1
STREAM_ONEWAY = 2
THREADS_ENV = "NETCLASS_THREADS"
Z95 = 1.96

__all__ = [
    "BLOCK_SIZE",
    "SeedSpec",
    "TailEstimate",
    "TrialStats",
    "estimate_mean_stop",
    "estimate_tail",
    "map_blocks",
    "sample_input",
    "wilson_interval",
    "worker_count",
]

T = TypeVar("T")


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream: int = STREAM_SESSIONS

    def __post_init__(self) -> None:
        if not 0 <= self.master_seed < 1 << 64:
            raise ValueError("master seed must be an unsigned 64-bit integer")

    def block_generator(self, block: int) -> np.random.Generator:
        key = self.master_seed | (self.stream << 64)
        counter = np.array([0, 0, block & 0xFFFFFFFFFFFFFFFF, block >> 64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key, counter=counter))

    def block_inputs(self, block: int, n: int) -> np.ndarray:
        """``(BLOCK_SIZE, n)`` fixed-point inputs for trials of block ``block``."""
        raw = self.block_generator(block).bit_generator.random_raw(BLOCK_SIZE * n)
        return np.asarray(raw, dtype=np.uint64).reshape(BLOCK_SIZE, n)

    def inputs(self, n: int, start: int, stop: int) -> np.ndarray:
        """Inputs for trials ``start .. stop-1`` as a ``(stop - start, n)`` array."""
        if stop <= start:
            return np.empty((0, n), dtype=np.uint64)
        first, last = start // BLOCK_SIZE, (stop - 1) // BLOCK_SIZE
        parts = [self.block_inputs(b, n) for b in range(first, last + 1)]
        stacked = np.concatenate(parts)
        offset = first * BLOCK_SIZE
        return stacked[start - offset : stop - offset]


def sample_input(config: ProblemConfig, seed: int | SeedSpec, trial: int) -> InputVector:
    """The ``n`` iid uniform fixed-point inputs of one trial."""
    spec = seed if isinstance(seed, SeedSpec) else SeedSpec(seed)
    row = spec.inputs(config.n, trial, trial + 1)[0]
    return InputVector(tuple(int(v) for v in row))


def worker_count(requested: int | None = None) -> int:
    """Explicit request, else ``$NETCLASS_THREADS``, else 1."""
    if requested is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        requested = int(env) if env else 1
    return max(1, int(requested))


def _block_ranges(reps: int) -> list[tuple[int, int, int]]:
    blocks = []
    for b in range(math.ceil(reps / BLOCK_SIZE)):
        blocks.append((b, b * BLOCK_SIZE, min(reps, (b + 1) * BLOCK_SIZE)))
    return blocks


def map_blocks(fn: Callable[[int, int, int], T], reps: int, workers: int | None = None) -> list[T]:
    """Apply ``fn(block, start, stop)`` to every block; results in block order."""
    ranges = _block_ranges(reps)
    nworkers = min(worker_count(workers), max(1, len(ranges)))
    if nworkers == 1:
        return [fn(*r) for r in ranges]
    with ThreadPoolExecutor(max_workers=nworkers) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))


@dataclass(frozen=True)
class TrialStats:
    """Streaming moments and tail counts of a stopping-time sample."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    tail_counts: tuple[int, ...] = ()
    excluded: int = 0
    seed: int | None = field(default=None, compare=False)

    @classmethod
    def from_values(cls, values: Sequence[int] | np.ndarray, k_max: int = 0, excluded: int = 0) -> TrialStats:
        x = np.asarray(values, dtype=np.float64)
        count = int(x.size)
        if count == 0:
            return cls(tail_counts=(0,) * k_max, excluded=excluded)
        mean = float(x.mean())
        m2 = float(np.sum((x - mean) ** 2))
        tails = tuple(int(np.count_nonzero(x > k)) for k in range(1, k_max + 1))
        return cls(count, mean, m2, tails, excluded)

    def merge(self, other: TrialStats) -> TrialStats:
        """Pairwise (Chan et al.) combination of two samples."""
        if not self.tail_counts or not other.tail_counts:
            tails = self.tail_counts or other.tail_counts
        elif len(self.tail_counts) != len(other.tail_counts):
            raise ValueError("cannot merge stats with different tail depths")
        else:
            tails = tuple(a + b for a, b in zip(self.tail_counts, other.tail_counts))
        if other.count == 0:
            return TrialStats(self.count, self.mean, self.m2, tails, self.excluded + other.excluded, self.seed)
        if self.count == 0:
            return TrialStats(other.count, other.mean, other.m2, tails, self.excluded + other.excluded, self.seed)
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / count
        return TrialStats(count, mean, m2, tails, self.excluded + other.excluded, self.seed)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else float("nan")

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 1 else float("nan")

    @property
    def ci95_halfwidth(self) -> float:
        return Z95 * self.stderr

    def tail_probability(self, k: int) -> float:
        return self.tail_counts[k - 1] / self.count

    def rates(self, n: int) -> dict[str, float]:
        """Mean sum rate under each applicable accounting mode."""
        out = {}
        for mode in DOWNLINK_MODES:
            if mode == "n2-shared-leader" and n != 2:
                continue
            out[mode] = sum_rate_per_round(n, mode) * self.mean
        return out

    def to_dict(self, n: int | None = None) -> dict:
        d = {
            "count": self.count,
            "mean": self.mean,
            "variance": self.variance,
            "m2": self.m2,
            "ci95_halfwidth": self.ci95_halfwidth,
            "tail_counts": {str(k): c for k, c in enumerate(self.tail_counts, start=1)},
            "excluded": self.excluded,
            "seed": self.seed,
        }
        if n is not None:
            d["rates"] = self.rates(n)
        return d


def reduce_stats(parts: Iterable[TrialStats]) -> TrialStats:
    total = TrialStats()
    for p in parts:
        total = total.merge(p)
    return total


def estimate_mean_stop(
    config: ProblemConfig,
    reps: int,
    seed: int,
    k_max: int = 16,
    workers: int | None = None,
) -> TrialStats:
    """Mean stopping time of ``reps`` independent sessions."""
    if reps < 2:
        raise ValueError("reps must be >= 2")
    spec = SeedSpec(seed, STREAM_SESSIONS)

    def run(block: int, start: int, stop: int) -> TrialStats:
        x = spec.inputs(config.n, start, stop)
        res = simulate_batch(config, x)
        decided = res.stop_time[res.stop_time > 0]
        return TrialStats.from_values(decided, k_max, excluded=int(res.exhausted.sum()))

    stats = reduce_stats(map_blocks(run, reps, workers))
    if stats.count == 0:
        raise RuntimeError(f"every session ran out of precision for {config}")
    return TrialStats(stats.count, stats.mean, stats.m2, stats.tail_counts, stats.excluded, seed)


def wilson_interval(successes: int, trials: int, alpha: float = 0.05) -> tuple[float, float]:
    from statsmodels.stats.proportion import proportion_confint

    lo, hi = proportion_confint(successes, trials, alpha=alpha, method="wilson")
    return float(lo), float(hi)


@dataclass(frozen=True)
class TailEstimate:
    k: int
    p_T_gt_k: float
    ci: tuple[float, float]
    p_band: float
    band_ci: tuple[float, float]
    reps: int

    def csv_row(self) -> tuple:
        return (self.k, self.p_T_gt_k, self.ci[0], self.ci[1], self.p_band, self.band_ci[0], self.band_ci[1])


TAIL_CSV_HEADER = ("k", "p_T_gt_k", "ci_lo", "ci_hi", "p_LZU", "ci_lo", "ci_hi")


def estimate_tail(
    config: ProblemConfig, k_max: int, reps: int, seed: int, workers: int | None = None
) -> list[TailEstimate]:
    """Empirical ``Pr[T > k]`` and, from an independent sample, ``Pr[L(k) < Z(k) < U(k)]``."""
    if not 1 <= k_max <= FRACTION_BITS:
        raise ValueError(f"k_max must lie in [1, {FRACTION_BITS}]")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    sessions = SeedSpec(seed, STREAM_SESSIONS)
    band = SeedSpec(seed, STREAM_BAND)

    def run(block: int, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        res = simulate_batch(config, sessions.inputs(config.n, start, stop))
        t = np.where(res.exhausted, FRACTION_BITS + 1, res.stop_time)
        gt = np.array([np.count_nonzero(t > k) for k in range(1, k_max + 1)], dtype=np.int64)
        inband = band_indicator(config, band.inputs(config.n, start, stop), k_max).sum(axis=0)
        return gt, inband.astype(np.int64)

    parts = map_blocks(run, reps, workers)
    gt = np.sum([p[0] for p in parts], axis=0)
    inband = np.sum([p[1] for p in parts], axis=0)
    out = []
    for k in range(1, k_max + 1):
        g, b = int(gt[k - 1]), int(inband[k - 1])
        out.append(TailEstimate(k, g / reps, wilson_interval(g, reps), b / reps, wilson_interval(b, reps), reps))
    return out
