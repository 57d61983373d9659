import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netclass.interactive import (
    TRACE_CSV_HEADER,
    Outcome,
    PrecisionExhausted,
    Signal,
    band_indicator,
    bit_expand,
    decide_signal,
    exact_label_batch,
    recursive_signal,
    run_session,
    session_sum_rate,
    simulate_batch,
    sum_rate_per_round,
)
from netclass.model import ONE, ClassLabel, DyadicRational, InputVector, ProblemConfig, classify

D = DyadicRational
S0, S1, C = Signal.STOP0, Signal.STOP1, Signal.CONTINUE


def fx(x: float) -> int:
    return InputVector.from_reals([x]).values[0]


def oracle_stop(config: ProblemConfig, values, max_rounds=64):
    """Stopping time straight from the truncated expansions, no recursion."""
    a = config.a.to_fraction()
    for j in range(1, max_rounds + 1):
        trunc = [v >> (64 - j) for v in values]
        z = Fraction(sum(trunc[: config.m]) - sum(trunc[config.m :]), 2**j)
        if z <= a - Fraction(config.m, 2**j):
            return j, 0
        if z >= a + Fraction(config.n_minus, 2**j):
            return j, 1
    return 0, -1


# --- bit_expand ---------------------------------------------------------------


def test_bit_expand_examples():
    assert bit_expand(fx(0.5), 1) == 1
    assert bit_expand(fx(0.25), 1) == 0
    assert bit_expand(fx(0.25), 2) == 1
    assert [bit_expand(fx(0.8125), j) for j in range(1, 5)] == [1, 1, 0, 1]


def test_bit_expand_beyond_precision():
    with pytest.raises(PrecisionExhausted):
        bit_expand(1, 65)
    assert bit_expand(1, 64) == 1


@given(st.integers(0, ONE - 1))
def test_bit_expand_matches_doubling_rule(x):
    frac = Fraction(x, ONE)
    for j in range(1, 65):
        b = math.floor(2 * frac)
        assert bit_expand(x, j) == b
        frac = 2 * frac - b


# --- leader tests -------------------------------------------------------------


def test_decide_signal_examples():
    c = ProblemConfig(2, 1, 0)
    assert decide_signal(c, D(-1, 1), 1) is S0
    assert decide_signal(c, D(1, 1), 1) is S1
    assert decide_signal(c, D(0), 1) is C


def test_recursive_signal_examples():
    c2 = ProblemConfig(2, 1, 0)
    assert recursive_signal(c2, -1, D(0))[0] is S0
    assert recursive_signal(c2, 1, D(0))[0] is S1
    assert recursive_signal(c2, 0, D(0)) == (C, D(0))
    c4 = ProblemConfig(4, 2, 0)
    assert recursive_signal(c4, 1, D(0)) == (C, D(-1))
    assert recursive_signal(c4, 2, D(1)) == (C, D(0))


# rows: a_rec = -3..3, columns: B = -2..2; integers are the continuing next threshold
GOLDEN_N4_M2 = {
    -3: [S1, S1, S1, S1, S1],
    -2: [S1, S1, S1, S1, S1],
    -1: [0, -1, S1, S1, S1],
    0: [S0, 1, 0, -1, S1],
    1: [S0, S0, S0, 1, 0],
    2: [S0, S0, S0, S0, S0],
    3: [S0, S0, S0, S0, S0],
}


@pytest.mark.parametrize("a_rec", sorted(GOLDEN_N4_M2))
def test_recursive_signal_golden_table(a_rec):
    c = ProblemConfig(4, 2, 0)
    for b, want in zip(range(-2, 3), GOLDEN_N4_M2[a_rec]):
        sig, nxt = recursive_signal(c, b, D(a_rec))
        if isinstance(want, Signal):
            assert sig is want, (a_rec, b)
        else:
            assert sig is C and nxt == want, (a_rec, b)


@settings(max_examples=300)
@given(
    st.integers(2, 9).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n))),
    st.integers(-200, 200),
    st.integers(0, 4),
    st.integers(1, 6),
    st.data(),
)
def test_direct_and_recursive_tests_agree(nm, znum, zexp, j, data):
    # a(j) = 2^(j-1) (a - Z(j-1)); both tests must see the same B
    n, m = nm
    c = ProblemConfig(n, m, D(m - 1) if m else D(-1))
    b = data.draw(st.integers(-(n - m), m))
    z_prev = D(znum, zexp + j - 1)
    a_rec = (c.a - z_prev) * (1 << (j - 1))
    z = z_prev + D(b, j)
    assert decide_signal(c, z, j) is recursive_signal(c, b, a_rec, j)[0]


# --- sessions -----------------------------------------------------------------


def test_session_one_round():
    c = ProblemConfig(2, 1, 0)
    tr = run_session(c, InputVector.from_reals([0.75, 0.25]))
    assert tr.stop_time == 1 and tr.label is ClassLabel.ONE
    r = tr.rounds[0]
    assert r.bits == (1, 0) and r.B == 1 and r.Z == D(1, 1) and r.U == D(1, 1)
    assert tr.summary() == {"T": 1, "label": 1, "uplink_bits": 2, "downlink_bits": 2 * math.log2(3), "outcome": "decided"}


def test_session_on_the_boundary_never_decides():
    # X_s = a exactly: Z(j) stays 0 strictly inside (L(j), U(j)) for every round
    c = ProblemConfig(2, 1, 0)
    tr = run_session(c, InputVector.from_reals([0.5, 0.5]))
    assert tr.outcome is Outcome.PRECISION_EXHAUSTED
    assert tr.stop_time == 64 and tr.label is None
    assert all(r.B == 0 and r.Z == 0 and r.signal is C for r in tr.rounds)
    with pytest.raises(ValueError):
        session_sum_rate(tr)


def test_trace_invariants_and_csv():
    c = ProblemConfig(8, 3, D(-3, 2))
    tr = run_session(c, InputVector.from_reals([0.9, 0.1, 0.3, 0.35, 0.2, 0.05, 0.6, 0.33]))
    assert tr.decided
    z = D(0)
    for r in tr.rounds[:-1]:
        assert r.signal is C
    for r in tr.rounds:
        assert r.B == sum(r.bits[:3]) - sum(r.bits[3:])
        z = z + D(r.B, r.j)
        assert r.Z == z
        assert r.L == c.a - D(3, r.j) and r.U == c.a + D(5, r.j)
    assert tr.rounds[-1].signal.label == tr.label == classify(c, tr.input)
    rows = list(tr.csv_rows(7))
    assert len(rows[0]) == len(TRACE_CSV_HEADER)
    assert rows[-1][0] == 7 and rows[-1][-1] == tr.rounds[-1].signal.value


def test_integer_threshold_recursion_stays_in_window():
    rng = np.random.default_rng(3)
    for n, m, a in [(4, 2, 1), (8, 5, -2), (9, 1, 0)]:
        c = ProblemConfig(n, m, a)
        for row in rng.integers(0, ONE, size=(300, n), dtype=np.uint64):
            tr = run_session(c, InputVector(tuple(int(v) for v in row)))
            for r in tr.rounds:
                assert r.a_rec.is_integer()
                assert -(n - m) < r.a_rec < m


CONFIGS = [
    ProblemConfig(2, 1, 0),
    ProblemConfig(4, 2, 1),
    ProblemConfig(8, 3, D(-3, 2)),
    ProblemConfig(8, 8, D(13, 2)),
    ProblemConfig(5, 0, D(-7, 3)),
    ProblemConfig(32, 16, D(5, 4)),
]


@pytest.mark.parametrize("c", CONFIGS, ids=str)
def test_session_matches_truncation_oracle_and_classifier(c):
    rng = np.random.default_rng(hash(str(c)) & 0xFFFF)
    raw = rng.integers(0, ONE, size=(400, c.n), dtype=np.uint64)
    batch = simulate_batch(c, raw)
    for i, row in enumerate(raw):
        values = tuple(int(v) for v in row)
        tr = run_session(c, InputVector(values))
        t, lab = oracle_stop(c, values)
        assert tr.stop_time == t == batch.stop_time[i]
        assert int(tr.label) == lab == batch.label[i]
        assert tr.label == classify(c, InputVector(values))


@pytest.mark.parametrize("c", CONFIGS, ids=str)
def test_band_indicator_matches_exact_band(c):
    rng = np.random.default_rng(5)
    raw = rng.integers(0, ONE, size=(200, c.n), dtype=np.uint64)
    band = band_indicator(c, raw, 20)
    a = c.a.to_fraction()
    for i, row in enumerate(raw):
        for k in range(1, 21):
            trunc = [int(v) >> (64 - k) for v in row]
            z = Fraction(sum(trunc[: c.m]) - sum(trunc[c.m :]), 2**k)
            inside = a - Fraction(c.m, 2**k) < z < a + Fraction(c.n_minus, 2**k)
            assert band[i, k - 1] == inside


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, ONE - 1), min_size=3, max_size=3), st.integers(-31, 63))
def test_exact_label_batch_matches_classify(values, anum):
    c = ProblemConfig(3, 2, D(anum, 5))
    arr = np.array([values], dtype=np.uint64)
    assert exact_label_batch(c, arr)[0] == classify(c, InputVector(tuple(values)))


def test_exact_label_batch_ulp_boundary():
    c = ProblemConfig(2, 1, D(1, 64))
    arr = np.array([[1, 0], [0, 0], [ONE - 1, ONE - 2]], dtype=np.uint64)
    assert exact_label_batch(c, arr).tolist() == [1, 0, 1]


def test_geometric_tail_n2():
    c = ProblemConfig(2, 1, 0)
    raw = np.random.default_rng(2018).integers(0, ONE, size=(100_000, 2), dtype=np.uint64)
    t = simulate_batch(c, raw).stop_time
    assert np.all(t > 0)
    for k in range(1, 11):
        p = 2.0**-k
        se = math.sqrt(p * (1 - p) / t.size)
        assert abs(np.mean(t > k) - p) <= 3 * se, k


# --- accounting ---------------------------------------------------------------


def test_sum_rate_formulas():
    assert sum_rate_per_round(2) * 2 == pytest.approx(10.3399, abs=1e-4)
    assert sum_rate_per_round(256) * 6 == pytest.approx(3970.5, abs=0.05)
    assert sum_rate_per_round(4, "two-bit") == 12
    assert sum_rate_per_round(2, "n2-shared-leader") * 2 == 4
    with pytest.raises(ValueError):
        sum_rate_per_round(4, "n2-shared-leader")


def test_session_sum_rate_matches_bit_counts():
    c = ProblemConfig(2, 1, 0)
    tr = run_session(c, InputVector.from_reals([0.75, 0.25]))
    assert session_sum_rate(tr) == pytest.approx(tr.uplink_bits + tr.downlink_bits)
