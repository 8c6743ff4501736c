from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from approval_lens.decode import ExecutionEvent
from approval_lens.errors import TokenAbsent
from approval_lens.ingest import MAX_UINT256
from approval_lens.ledger import LedgerConfig, LedgerSnapshot, TokenState
from approval_lens.risk import (RiskLevel, attacker_oracle, build_risk_snapshot, drained_amounts, level_of,
                                percent, risk_amount, risk_distribution, risk_level, risk_series)

T = "0x" + "0a" * 20
S = "0x" + "02" * 20
U = ["0x%040x" % (i + 1) for i in range(6)]

uint = st.one_of(st.sampled_from([0, 1, 2, 1 << 248, MAX_UINT256 - 1, MAX_UINT256]), st.integers(0, MAX_UINT256))


def state(entries):
    """entries: {owner: (allowance, balance)} for spender S."""
    st_ = TokenState()
    for o, (a, b) in entries.items():
        if a:
            st_.allowance[(o, S)] = a
        if b:
            st_.balance_of[o] = b
        st_.approval_history.add((o, S))
    return st_


@pytest.mark.parametrize("a,b,level", [
    (0, 0, RiskLevel.NO_RISK),
    (0, 5, RiskLevel.NO_RISK),
    (5, 0, RiskLevel.LOW_RISK),
    (5, 5, RiskLevel.HIGH_RISK),
])
def test_level_sign_cases(a, b, level):
    assert level_of(a, b) is level
    assert risk_level(state({U[0]: (a, b)}), U[0], S) is level


@given(uint, uint)
def test_risk_amount_is_min(a, b):
    st_ = state({U[0]: (a, b)})
    assert risk_amount(st_, U[0], S) == min(a, b)
    assert (risk_amount(st_, U[0], S) > 0) == (risk_level(st_, U[0], S) is RiskLevel.HIGH_RISK)


@given(st.dictionaries(st.sampled_from(U), st.tuples(uint, uint), min_size=1), st.booleans())
@settings(max_examples=60, deadline=None)
def test_attacker_oracle_matches_risk_amount(entries, no_dec):
    st_ = state(entries)
    before = st_.copy()
    stolen, total = attacker_oracle(st_, S, LedgerConfig(infinite_allowance_no_decrement=no_dec))
    for o, (a, b) in entries.items():
        assert stolen.get(o, 0) == min(a, b) == risk_amount(before, o, S)
    assert total == sum(min(a, b) for a, b in entries.values())
    assert st_ == before


def oracle_percent(count, total):
    # decimal.Decimal with explicit rounding mode, no integer tricks
    return (Decimal(100) * count / total).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)


@given(st.integers(1, 10**6).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
def test_percent_matches_decimal_oracle(args):
    count, total = args
    assert percent(count, total) == oracle_percent(count, total)
    exact = Fraction(100 * count, total)
    assert abs(Fraction(percent(count, total)) - exact) <= Fraction(1, 20)


def test_percent_half_up_and_zero_total():
    assert str(percent(1, 8)) == "12.5"
    assert str(percent(1, 16)) == "6.3"  # 6.25 rounds up
    assert str(percent(1, 3)) == "33.3"
    assert str(percent(0, 0)) == "0.0"


def test_distribution_worst_case_fold():
    st_ = TokenState()
    other = "0x" + "0f" * 20
    st_.balance_of = {U[0]: 10, U[2]: 4}
    st_.allowance = {(U[0], S): 1, (U[1], S): 9, (U[2], other): 3}
    st_.approval_history = {(U[0], S), (U[0], other), (U[1], S), (U[2], S), (U[2], other)}
    snap = build_risk_snapshot(LedgerSnapshot(7, {T: st_}))
    assert len(snap.tuples) == 5
    dist = risk_distribution(snap, T)
    # U0 high (via S), U1 low, U2 high (via other) despite NoRisk with S
    assert (dist.users, dist.n_no, dist.n_low, dist.n_high) == (3, 0, 1, 2)
    assert dist.as_tuple() == (3, Decimal("0.0"), Decimal("33.3"), Decimal("66.7"))
    with pytest.raises(TokenAbsent):
        risk_distribution(snap, S)


def test_series_zero_before_first_appearance():
    st_ = state({U[0]: (5, 3), U[1]: (2, 0)})
    snaps = [build_risk_snapshot(LedgerSnapshot(1, {})), build_risk_snapshot(LedgerSnapshot(2, {T: st_}))]
    assert [r.value for r in risk_series(snaps, T)] == [0, 3]
    rows = risk_series(snaps, T, "level_counts")
    assert [(r.block, r.metric, r.value) for r in rows][3:] == [(2, "users_no", 0), (2, "users_low", 1),
                                                                (2, "users_high", 1)]
    with pytest.raises(TokenAbsent):
        risk_series(snaps[:1], T)
    with pytest.raises(ValueError):
        risk_series(snaps, T, "median")


def test_drained_amounts_window():
    h = "0x" + "00" * 32
    evs = [ExecutionEvent(U[0], S, U[5], T, 4, 3, 0, h), ExecutionEvent(U[0], S, U[5], T, 6, 4, 0, h),
           ExecutionEvent(U[1], U[4], U[5], T, 6, 4, 1, h)]
    assert drained_amounts(evs, S) == {U[0]: 10}
    assert drained_amounts(evs, S, from_block=4) == {U[0]: 6}
    assert drained_amounts(evs, S, token=U[3]) == {}
