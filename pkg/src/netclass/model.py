"""Problem configuration, exact dyadic arithmetic and the centralized classifier.

Inputs are 64-bit fixed-point fractions ``N / 2**64``; thresholds are dyadic
rationals. Every comparison in this module is exact integer arithmetic.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

FRACTION_BITS = 64
ONE = 1 << FRACTION_BITS

__all__ = [
    "FRACTION_BITS",
    "ClassLabel",
    "ConfigError",
    "DyadicRational",
    "InputVector",
    "ProblemConfig",
    "classify",
    "gamma",
    "parse_config",
    "signed_sum",
]


class ConfigError(ValueError):
    """Invalid problem configuration or malformed input."""


Number = Union[int, Fraction, "DyadicRational"]


@dataclass(frozen=True, slots=True)
class DyadicRational:
    """Exact value ``numerator / 2**exponent`` kept in canonical form."""

    numerator: int
    exponent: int = 0

    def __post_init__(self) -> None:
        if self.exponent < 0:
            raise ValueError("exponent must be non-negative")
        num, exp = self.numerator, self.exponent
        if exp and num == 0:
            exp = 0
        elif exp and not num & 1:
            shift = min(exp, (num & -num).bit_length() - 1)
            num >>= shift
            exp -= shift
        if exp != self.exponent:
            object.__setattr__(self, "numerator", num)
            object.__setattr__(self, "exponent", exp)

    @classmethod
    def of(cls, value: Number) -> DyadicRational:
        """Convert an int, a dyadic Fraction or a DyadicRational."""
        if isinstance(value, DyadicRational):
            return value
        if isinstance(value, bool):
            raise TypeError("bool is not a number here")
        if isinstance(value, int):
            return cls(value, 0)
        if isinstance(value, Fraction):
            den = value.denominator
            if den & (den - 1):
                raise ValueError(f"{value} is not dyadic")
            return cls(value.numerator, den.bit_length() - 1)
        raise TypeError(f"cannot convert {type(value).__name__} to DyadicRational")

    @classmethod
    def parse(cls, text: str) -> DyadicRational:
        """Parse ``<int>`` or ``<int>/2^<int>``."""
        match = re.fullmatch(r"\s*([+-]?\d+)\s*(?:/\s*2\^(\d+))?\s*", text)
        if match is None:
            raise ConfigError(f"malformed dyadic rational {text!r}")
        return cls(int(match.group(1)), int(match.group(2) or 0))

    def to_fraction(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.exponent)

    def is_integer(self) -> bool:
        return self.exponent == 0

    def scaled_numerator(self, exponent: int) -> int:
        """Numerator over ``2**exponent``; ``exponent`` must be >= self.exponent."""
        return self.numerator << (exponent - self.exponent)

    def double_minus(self, b: int) -> DyadicRational:
        """The doubling map ``x -> 2x - b``."""
        if self.exponent:
            return DyadicRational(self.numerator - (b << (self.exponent - 1)), self.exponent - 1)
        return DyadicRational(2 * self.numerator - b, 0)

    def _align(self, other: Number) -> tuple[int, int, int]:
        other = DyadicRational.of(other)
        exp = max(self.exponent, other.exponent)
        return self.scaled_numerator(exp), other.scaled_numerator(exp), exp

    def __add__(self, other: Number) -> DyadicRational:
        a, b, exp = self._align(other)
        return DyadicRational(a + b, exp)

    __radd__ = __add__

    def __sub__(self, other: Number) -> DyadicRational:
        a, b, exp = self._align(other)
        return DyadicRational(a - b, exp)

    def __rsub__(self, other: Number) -> DyadicRational:
        return DyadicRational.of(other) - self

    def __neg__(self) -> DyadicRational:
        return DyadicRational(-self.numerator, self.exponent)

    def __mul__(self, other: int) -> DyadicRational:
        if not isinstance(other, int):
            return NotImplemented
        return DyadicRational(self.numerator * other, self.exponent)

    __rmul__ = __mul__

    def shift(self, k: int) -> DyadicRational:
        """Multiply by ``2**-k`` (k >= 0)."""
        return DyadicRational(self.numerator, self.exponent + k)

    def _cmp(self, other: object) -> int | None:
        if isinstance(other, (DyadicRational, int)) and not isinstance(other, bool):
            a, b, _ = self._align(other)
        elif isinstance(other, Fraction):
            a, b = self.numerator * other.denominator, other.numerator << self.exponent
        else:
            return None
        return (a > b) - (a < b)

    def __eq__(self, other: object) -> bool:
        c = self._cmp(other)
        return NotImplemented if c is None else c == 0

    def __hash__(self) -> int:
        return hash(self.to_fraction())

    def __lt__(self, other: Number) -> bool:
        c = self._cmp(other)
        return NotImplemented if c is None else c < 0

    def __le__(self, other: Number) -> bool:
        c = self._cmp(other)
        return NotImplemented if c is None else c <= 0

    def __gt__(self, other: Number) -> bool:
        c = self._cmp(other)
        return NotImplemented if c is None else c > 0

    def __ge__(self, other: Number) -> bool:
        c = self._cmp(other)
        return NotImplemented if c is None else c >= 0

    def __float__(self) -> float:
        return math.ldexp(self.numerator, -self.exponent) if self.exponent < 1000 else float(self.to_fraction())

    def __str__(self) -> str:
        return str(self.numerator) if self.exponent == 0 else f"{self.numerator}/2^{self.exponent}"

    def __repr__(self) -> str:
        return f"DyadicRational({self})"


class ClassLabel(enum.IntEnum):
    ZERO = 0
    ONE = 1


@dataclass(frozen=True, slots=True)
class ProblemConfig:
    """Classifier ``1{sum_{i<=m} X_i - sum_{i>m} X_i >= a}`` over ``n`` nodes.

    Nodes ``0..m-1`` carry weight +1 and nodes ``m..n-1`` weight -1.
    """

    n: int
    m: int
    a: DyadicRational

    def __post_init__(self) -> None:
        try:
            a = DyadicRational.of(self.a)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        object.__setattr__(self, "a", a)
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if not 0 <= self.m <= self.n:
            raise ConfigError(f"m must lie in [0, n], got m={self.m}, n={self.n}")
        if not -(self.n - self.m) < a < self.m:
            raise ConfigError(
                f"threshold a={a} outside the non-trivial window ({-(self.n - self.m)}, {self.m})"
            )

    @property
    def n_minus(self) -> int:
        return self.n - self.m

    def swapped(self) -> ProblemConfig:
        """Label-swap mirror ``(m, a) -> (n - m, -a)``."""
        return ProblemConfig(self.n, self.n - self.m, -self.a)

    def __str__(self) -> str:
        return f"n={self.n} m={self.m} a={self.a}"


def parse_config(text: str) -> ProblemConfig:
    """Parse ``n=<int> m=<int> a=<int>[/2^<int>]``."""
    fields: dict[str, str] = {}
    for token in text.split():
        key, sep, value = token.partition("=")
        if not sep or key not in ("n", "m", "a") or key in fields:
            raise ConfigError(f"malformed config token {token!r}")
        fields[key] = value
    if set(fields) != {"n", "m", "a"}:
        raise ConfigError(f"config needs n, m and a: {text!r}")
    try:
        n, m = int(fields["n"]), int(fields["m"])
    except ValueError:
        raise ConfigError(f"malformed config {text!r}") from None
    return ProblemConfig(n, m, DyadicRational.parse(fields["a"]))


@dataclass(frozen=True, slots=True)
class InputVector:
    """Observations ``X_i = values[i] / 2**64`` in ``[0, 1)``."""

    values: tuple[int, ...]

    def __post_init__(self) -> None:
        values = tuple(int(v) for v in self.values)
        for v in values:
            if not 0 <= v < ONE:
                raise ConfigError(f"fixed-point value {v} outside [0, 2**64)")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_reals(cls, xs: Iterable[float | Fraction | str]) -> InputVector:
        """Round each real down to the 64-bit grid."""
        out = []
        for x in xs:
            try:
                frac = Fraction(x)
            except (ValueError, TypeError):
                raise ConfigError(f"malformed input value {x!r}") from None
            if not 0 <= frac < 1:
                raise ConfigError(f"input value {x} outside [0, 1)")
            out.append(math.floor(frac * ONE))
        return cls(tuple(out))

    def __len__(self) -> int:
        return len(self.values)

    def as_fractions(self) -> list[Fraction]:
        return [Fraction(v, ONE) for v in self.values]


def _check_length(config: ProblemConfig, x: InputVector | Sequence[int]) -> Sequence[int]:
    values = x.values if isinstance(x, InputVector) else x
    if len(values) != config.n:
        raise ConfigError(f"input has {len(values)} entries, config expects n={config.n}")
    return values


def signed_sum_numerator(config: ProblemConfig, x: InputVector | Sequence[int]) -> int:
    """``X_s * 2**64`` as an exact integer."""
    values = _check_length(config, x)
    return sum(values[: config.m]) - sum(values[config.m :])


def signed_sum(config: ProblemConfig, x: InputVector) -> Fraction:
    return Fraction(signed_sum_numerator(config, x), ONE)


def classify(config: ProblemConfig, x: InputVector) -> ClassLabel:
    """Centralized oracle: 1 iff the signed sum reaches the threshold."""
    s = signed_sum_numerator(config, x)
    a = config.a
    # s / 2**64 >= num / 2**exp
    return ClassLabel(int(s << a.exponent >= a.numerator << FRACTION_BITS))


def gamma(config: ProblemConfig) -> float:
    return float(config.a) / config.n + 0.5 - config.m / config.n
