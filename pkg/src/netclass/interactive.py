"""The infinite-round bit-exchange protocol.

Each round every sensor sends the next bit of its binary expansion to a
leader, which answers stop0 / stop1 / continue. ``run_session`` evaluates the
direct description (running aggregate against shrinking thresholds) and the
recursive description (per-round bit sum against a shifting threshold) side
by side and refuses to continue if they ever disagree.

``simulate_batch`` is the vectorized twin used by the Monte Carlo harness; it
runs the recursive description on scaled integers and is checked against
``run_session`` in the test suite.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .model import (
    FRACTION_BITS,
    ClassLabel,
    ConfigError,
    DyadicRational,
    InputVector,
    ProblemConfig,
    signed_sum_numerator,
)

LOG2_3 = math.log2(3)
DOWNLINK_MODES = ("log3", "two-bit", "n2-shared-leader")

__all__ = [
    "DOWNLINK_MODES",
    "BatchResult",
    "Outcome",
    "PrecisionExhausted",
    "ProtocolInvariantError",
    "RoundRecord",
    "SessionTrace",
    "Signal",
    "band_indicator",
    "bit_expand",
    "decide_signal",
    "exact_label_batch",
    "recursive_signal",
    "run_session",
    "session_sum_rate",
    "simulate_batch",
    "sum_rate_per_round",
]


class PrecisionExhausted(ArithmeticError):
    """All 64 fixed-point bits of an input have been consumed."""


class ProtocolInvariantError(RuntimeError):
    """The two protocol descriptions or the sandwich bound disagreed."""


class Signal(str, enum.Enum):
    STOP0 = "stop0"
    STOP1 = "stop1"
    CONTINUE = "continue"

    @property
    def label(self) -> ClassLabel | None:
        if self is Signal.CONTINUE:
            return None
        return ClassLabel.ONE if self is Signal.STOP1 else ClassLabel.ZERO


class Outcome(str, enum.Enum):
    DECIDED = "decided"
    PRECISION_EXHAUSTED = "precision_exhausted"


def bit_expand(x: int, j: int) -> int:
    """Bit ``j`` (1-based, MSB first) of the fixed-point fraction ``x / 2**64``."""
    if j < 1:
        raise ValueError(f"round index must be >= 1, got {j}")
    if j > FRACTION_BITS:
        raise PrecisionExhausted(f"round {j} needs more than {FRACTION_BITS} input bits")
    return (x >> (FRACTION_BITS - j)) & 1


def decide_signal(config: ProblemConfig, z: DyadicRational, j: int) -> Signal:
    """Leader's test of the round-``j`` aggregate against ``L(j)`` and ``U(j)``."""
    lower = config.a - DyadicRational(config.m, j)
    upper = config.a + DyadicRational(config.n_minus, j)
    if z <= lower:
        return Signal.STOP0
    if z >= upper:
        return Signal.STOP1
    return Signal.CONTINUE


def recursive_signal(
    config: ProblemConfig, b: int, a_rec: DyadicRational, j: int | None = None
) -> tuple[Signal, DyadicRational]:
    """Test the bit sum ``b`` against ``2a(j) - m`` and ``2a(j) + (n - m)``.

    Returns the signal and the next threshold ``2a(j) - b``. The round index
    is accepted for symmetry with :func:`decide_signal`; the test does not
    depend on it.
    """
    twice = a_rec * 2
    if b <= twice - config.m:
        signal = Signal.STOP0
    elif b >= twice + config.n_minus:
        signal = Signal.STOP1
    else:
        signal = Signal.CONTINUE
    return signal, a_rec.double_minus(b)


@dataclass(frozen=True, slots=True)
class RoundRecord:
    j: int
    bits: tuple[int, ...]
    B: int
    Z: DyadicRational
    L: DyadicRational
    U: DyadicRational
    a_rec: DyadicRational
    signal: Signal


@dataclass(frozen=True)
class SessionTrace:
    config: ProblemConfig
    input: InputVector
    rounds: tuple[RoundRecord, ...]
    stop_time: int
    label: ClassLabel | None
    uplink_bits: int
    downlink_bits: float
    outcome: Outcome

    @property
    def decided(self) -> bool:
        return self.outcome is Outcome.DECIDED

    def summary(self) -> dict:
        return {
            "T": self.stop_time,
            "label": None if self.label is None else int(self.label),
            "uplink_bits": self.uplink_bits,
            "downlink_bits": self.downlink_bits,
            "outcome": self.outcome.value,
        }

    def csv_rows(self, session_id: int = 0) -> Iterator[tuple]:
        """Rows of ``session_id,j,B,Z_num,Z_exp,a_rec_num,a_rec_exp,signal``."""
        for r in self.rounds:
            yield (
                session_id,
                r.j,
                r.B,
                r.Z.numerator,
                r.Z.exponent,
                r.a_rec.numerator,
                r.a_rec.exponent,
                r.signal.value,
            )


TRACE_CSV_HEADER = ("session_id", "j", "B", "Z_num", "Z_exp", "a_rec_num", "a_rec_exp", "signal")


def _check_sandwich(config: ProblemConfig, xs_num: int, z: DyadicRational, j: int) -> None:
    # Z(j) - (n-m)2^-j < X_s < Z(j) + m 2^-j; an empty weight group makes its side non-strict
    exp = max(z.exponent, j, FRACTION_BITS)
    zs = z.scaled_numerator(exp)
    xs = xs_num << (exp - FRACTION_BITS)
    lo = zs - (config.n_minus << (exp - j))
    hi = zs + (config.m << (exp - j))
    ok_lo = lo < xs if config.n_minus else lo <= xs
    ok_hi = xs < hi if config.m else xs <= hi
    if not (ok_lo and ok_hi):
        raise ProtocolInvariantError(f"sandwich bound violated at round {j} for {config}")


def run_session(config: ProblemConfig, x: InputVector, max_rounds: int = FRACTION_BITS) -> SessionTrace:
    """Simulate one session, cross-checking both protocol descriptions every round."""
    if not 1 <= max_rounds <= FRACTION_BITS:
        raise ValueError(f"max_rounds must lie in [1, {FRACTION_BITS}]")
    values = x.values
    if len(values) != config.n:
        raise ConfigError(f"input has {len(values)} entries, config expects n={config.n}")
    xs_num = signed_sum_numerator(config, values)
    m = config.m
    z = DyadicRational(0)
    a_rec = config.a
    rounds: list[RoundRecord] = []
    signal = Signal.CONTINUE
    for j in range(1, max_rounds + 1):
        shift = FRACTION_BITS - j
        bits = tuple((v >> shift) & 1 for v in values)
        b = sum(bits[:m]) - sum(bits[m:])
        z = z + DyadicRational(b, j)
        direct = decide_signal(config, z, j)
        signal, a_next = recursive_signal(config, b, a_rec, j)
        if direct is not signal:
            raise ProtocolInvariantError(
                f"round {j}: direct signal {direct.value} != recursive {signal.value} for {config}"
            )
        _check_sandwich(config, xs_num, z, j)
        rounds.append(
            RoundRecord(
                j=j,
                bits=bits,
                B=b,
                Z=z,
                L=config.a - DyadicRational(m, j),
                U=config.a + DyadicRational(config.n_minus, j),
                a_rec=a_rec,
                signal=signal,
            )
        )
        if signal is not Signal.CONTINUE:
            break
        a_rec = a_next
    t = len(rounds)
    outcome = Outcome.DECIDED if signal is not Signal.CONTINUE else Outcome.PRECISION_EXHAUSTED
    return SessionTrace(
        config=config,
        input=x,
        rounds=tuple(rounds),
        stop_time=t,
        label=signal.label,
        uplink_bits=config.n * t,
        downlink_bits=config.n * LOG2_3 * t,
        outcome=outcome,
    )


def sum_rate_per_round(n: int, downlink: str = "log3") -> float:
    """Bits exchanged per round under the chosen accounting.

    ``log3`` charges each ternary feedback log2(3) bits, ``two-bit`` charges a
    realizable 2-bit codeword, and ``n2-shared-leader`` is the two-node accounting in
    which one sensor doubles as the leader (1 bit up, 1 bit back).
    """
    if downlink == "log3":
        return n * (1.0 + LOG2_3)
    if downlink == "two-bit":
        return n * 3.0
    if downlink == "n2-shared-leader":
        if n != 2:
            raise ValueError("the sensor-as-leader accounting is defined for n=2 only")
        return 2.0
    raise ValueError(f"unknown downlink accounting {downlink!r}")


def session_sum_rate(trace: SessionTrace, downlink: str = "log3") -> float:
    if not trace.decided:
        raise ValueError("sum rate is defined for decided sessions only")
    return sum_rate_per_round(trace.config.n, downlink) * trace.stop_time


# --- vectorized path ---------------------------------------------------------

_MAX_SCALE_EXPONENT = 40


@dataclass(frozen=True)
class BatchResult:
    """Per-session stop times (0 where precision ran out) and labels (-1 likewise)."""

    stop_time: np.ndarray
    label: np.ndarray

    @property
    def exhausted(self) -> np.ndarray:
        return self.stop_time == 0


def _round_bits(inputs: np.ndarray, j: int, m: int) -> np.ndarray:
    bits = (inputs >> np.uint64(FRACTION_BITS - j)) & np.uint64(1)
    bits = bits.astype(np.int64)
    return bits[:, :m].sum(axis=1) - bits[:, m:].sum(axis=1)


def _scale(config: ProblemConfig) -> int:
    e = config.a.exponent
    if e > _MAX_SCALE_EXPONENT or config.n > 1 << 20:
        raise ValueError(f"batch path supports thresholds with exponent <= {_MAX_SCALE_EXPONENT}")
    return e


def simulate_batch(
    config: ProblemConfig, inputs: np.ndarray, max_rounds: int = FRACTION_BITS
) -> BatchResult:
    """Run many sessions at once on a ``(reps, n)`` uint64 input array."""
    inputs = np.asarray(inputs, dtype=np.uint64)
    if inputs.ndim != 2 or inputs.shape[1] != config.n:
        raise ValueError(f"inputs must have shape (reps, {config.n})")
    e = _scale(config)
    unit = 1 << e
    m, nm = config.m, config.n_minus
    reps = inputs.shape[0]
    stop = np.zeros(reps, dtype=np.int64)
    label = np.full(reps, -1, dtype=np.int64)
    active = np.arange(reps)
    # threshold a(j) scaled by 2**e stays integral and bounded while continuing
    thresh = np.full(reps, config.a.numerator, dtype=np.int64)
    for j in range(1, max_rounds + 1):
        if active.size == 0:
            break
        b = _round_bits(inputs[active], j, m) * unit
        twice = 2 * thresh
        s0 = b <= twice - m * unit
        s1 = b >= twice + nm * unit
        done = s0 | s1
        stop[active[done]] = j
        label[active[s1]] = 1
        label[active[s0]] = 0
        keep = ~done
        active = active[keep]
        thresh = (twice - b)[keep]
    return BatchResult(stop_time=stop, label=label)


def band_indicator(config: ProblemConfig, inputs: np.ndarray, k_max: int) -> np.ndarray:
    """Boolean ``(reps, k_max)`` array of the events ``L(k) < Z(k) < U(k)``.

    Tracks ``D(k) = 2**k (Z(k) - a)`` scaled by ``2**e``; once ``|D| >= n`` it
    can never return to the band, so it is clamped to keep int64 exact.
    """
    inputs = np.asarray(inputs, dtype=np.uint64)
    if k_max > FRACTION_BITS:
        raise PrecisionExhausted(f"k_max {k_max} exceeds {FRACTION_BITS} input bits")
    e = _scale(config)
    unit = 1 << e
    n, m, nm = config.n, config.m, config.n_minus
    d = np.full(inputs.shape[0], -config.a.numerator, dtype=np.int64)
    cap = 2 * n * unit
    out = np.empty((inputs.shape[0], k_max), dtype=bool)
    for k in range(1, k_max + 1):
        d = 2 * d + _round_bits(inputs, k, m) * unit
        np.clip(d, -cap, cap, out=d)
        out[:, k - 1] = (d > -m * unit) & (d < nm * unit)
    return out


def exact_label_batch(config: ProblemConfig, inputs: np.ndarray) -> np.ndarray:
    """Vectorized classifier with an exact two-limb integer comparison."""
    inputs = np.asarray(inputs, dtype=np.uint64)
    m = config.m
    hi = (inputs >> np.uint64(32)).astype(np.int64)
    lo = (inputs & np.uint64(0xFFFFFFFF)).astype(np.int64)
    s_hi = hi[:, :m].sum(axis=1) - hi[:, m:].sum(axis=1)
    s_lo = lo[:, :m].sum(axis=1) - lo[:, m:].sum(axis=1)
    a = config.a
    if a.exponent > FRACTION_BITS:
        total = s_hi.astype(object) * (1 << 32) + s_lo.astype(object)
        return np.array([int(t << a.exponent >= a.numerator << FRACTION_BITS) for t in total], dtype=np.int64)
    target = a.numerator << (FRACTION_BITS - a.exponent)
    t_hi, t_lo = target >> 32, target & 0xFFFFFFFF
    diff_lo = s_lo - t_lo
    # carry normalizes the low limb into [0, 2**32); sign then rests on the high limb
    top = s_hi - t_hi + (diff_lo >> 32)
    return (top >= 0).astype(np.int64)
