from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ks_2samp

from netclass.model import (
    ONE,
    ClassLabel,
    ConfigError,
    DyadicRational,
    InputVector,
    ProblemConfig,
    classify,
    gamma,
    parse_config,
    signed_sum,
)

D = DyadicRational


def cfg(n, m, a):
    return ProblemConfig(n, m, a)


def vec(*xs):
    return InputVector.from_reals(xs)


# --- DyadicRational ---------------------------------------------------------


def test_dyadic_canonical_form():
    assert D(4, 3) == D(1, 1)
    assert (D(4, 3).numerator, D(4, 3).exponent) == (1, 1)
    assert (D(0, 9).numerator, D(0, 9).exponent) == (0, 0)
    assert (D(6, 1).numerator, D(6, 1).exponent) == (3, 0)


def test_dyadic_parse_and_str_roundtrip():
    assert D.parse("3/2^1") == Fraction(3, 2)
    assert D.parse("-5") == -5
    assert str(D(3, 1)) == "3/2^1"
    assert D.parse(str(D(-7, 5))) == D(-7, 5)
    with pytest.raises(ConfigError):
        D.parse("3/4")


def test_dyadic_rejects_non_dyadic_fraction():
    with pytest.raises(ValueError):
        D.of(Fraction(1, 3))


@given(st.integers(-10**6, 10**6), st.integers(0, 40), st.integers(-8, 8))
def test_double_minus_matches_fraction_arithmetic(num, exp, b):
    x = D(num, exp)
    assert x.double_minus(b).to_fraction() == 2 * Fraction(num, 2**exp) - b


@given(st.integers(-10**9, 10**9), st.integers(0, 30), st.integers(-10**9, 10**9), st.integers(0, 30))
def test_dyadic_ordering_and_sums_are_exact(n1, e1, n2, e2):
    x, y = D(n1, e1), D(n2, e2)
    fx, fy = x.to_fraction(), y.to_fraction()
    assert (x < y) == (fx < fy)
    assert (x <= y) == (fx <= fy)
    assert (x == y) == (fx == fy)
    assert (x + y).to_fraction() == fx + fy
    assert (x - y).to_fraction() == fx - fy
    assert hash(x) == hash(D(n1 << 3, e1 + 3))


# --- ProblemConfig ----------------------------------------------------------


@pytest.mark.parametrize(
    "n,m,a",
    [(1, 0, 0), (2, 3, 0), (2, 1, 1), (2, 1, -1), (4, 2, D(5, 1)), (4, 0, 0), (4, 4, 4)],
)
def test_config_rejects_trivial_or_malformed(n, m, a):
    with pytest.raises(ConfigError):
        ProblemConfig(n, m, a)


def test_config_accepts_window_interior():
    c = cfg(4, 2, D(3, 1))
    assert c.a == Fraction(3, 2)
    assert cfg(4, 0, -1).n_minus == 4
    assert cfg(4, 1, 0).swapped() == cfg(4, 3, 0)


@pytest.mark.parametrize(
    "text,expected",
    [
        ("n=32 m=16 a=0", (32, 16, D(0))),
        ("n=4 m=2 a=3/2^1", (4, 2, D(3, 1))),
        ("  a=-1 n=4   m=2 ", (4, 2, D(-1))),
    ],
)
def test_parse_config(text, expected):
    c = parse_config(text)
    assert (c.n, c.m, c.a) == expected


@pytest.mark.parametrize("text", ["n=4 m=2", "n=4 m=2 a=0 a=1", "n=x m=2 a=0", "n=4 m=2 b=0", "n=4 m=2 a=1/3"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


# --- signed_sum / classify / gamma ------------------------------------------


def test_signed_sum_examples():
    assert signed_sum(cfg(2, 1, 0), vec(0.75, 0.25)) == Fraction(1, 2)
    assert signed_sum(cfg(4, 2, 0), vec(0, 0, 0, 0)) == 0
    assert signed_sum(cfg(3, 3, 1), vec(0.5, 0.5, 0.5)) == Fraction(3, 2)


def test_signed_sum_length_mismatch():
    with pytest.raises(ConfigError):
        signed_sum(cfg(3, 1, 0), vec(0.1, 0.2))


def test_classify_examples():
    assert classify(cfg(2, 1, 0), vec(0.5, 0.5)) is ClassLabel.ONE
    assert classify(cfg(2, 1, 0), vec(0.25, 0.75)) is ClassLabel.ZERO
    assert classify(cfg(4, 2, 1), vec("0.9", "0.9", "0.1", "0.1")) is ClassLabel.ONE


def test_classify_exact_at_one_ulp():
    c = cfg(2, 1, D(1, 64))
    assert classify(c, InputVector((1, 0))) is ClassLabel.ONE
    assert classify(c, InputVector((0, 0))) is ClassLabel.ZERO


def test_gamma_examples():
    assert gamma(cfg(32, 16, 0)) == 0.0
    assert gamma(cfg(4, 2, 1)) == 0.25
    assert gamma(cfg(8, 2, 0)) == 0.25


def test_input_vector_bounds():
    with pytest.raises(ConfigError):
        InputVector((ONE,))
    with pytest.raises(ConfigError):
        vec(1.0)
    assert vec(0.5).values == (1 << 63,)


CONFIGS = [cfg(2, 1, 0), cfg(4, 2, 1), cfg(8, 3, D(-3, 2)), cfg(32, 16, 0), cfg(5, 5, 2)]


@pytest.mark.parametrize("c", CONFIGS, ids=str)
def test_classify_agrees_with_signed_sum_sign(c):
    rng = np.random.default_rng(7)
    raw = rng.integers(0, ONE, size=(20_000, c.n), dtype=np.uint64)
    a = c.a.to_fraction()
    for row in raw[:2000]:
        x = InputVector(tuple(int(v) for v in row))
        assert (classify(c, x) == 1) == (signed_sum(c, x) >= a)
    # vectorized half of the check in float is only safe away from the boundary
    fx = raw.astype(np.float64) / 2.0**64
    s = fx[:, : c.m].sum(axis=1) - fx[:, c.m :].sum(axis=1)
    far = np.abs(s - float(a)) > 1e-9
    from netclass.interactive import exact_label_batch

    labels = exact_label_batch(c, raw)
    assert np.array_equal(labels[far], (s[far] >= float(a)).astype(labels.dtype))


def test_weight_permutation_leaves_signed_sum_distribution_unchanged():
    rng = np.random.default_rng(11)
    x = rng.random((100_000, 6))
    first = x[:, :2].sum(axis=1) - x[:, 2:].sum(axis=1)
    y = rng.random((100_000, 6))
    scattered = y[:, [1, 4]].sum(axis=1) - y[:, [0, 2, 3, 5]].sum(axis=1)
    assert ks_2samp(first, scattered).pvalue > 1e-3


@settings(max_examples=200)
@given(st.integers(2, 12).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n))))
def test_threshold_at_or_beyond_m_is_rejected(nm):
    n, m = nm
    with pytest.raises(ConfigError):
        ProblemConfig(n, m, m)
    with pytest.raises(ConfigError):
        ProblemConfig(n, m, -(n - m))
