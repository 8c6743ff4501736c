"""Risk of approved tokens: amount at stake and coarse risk level per (owner, spender, token)."""
from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Iterable, NamedTuple, Optional

from .decode import ExecutionEvent
from .errors import InsufficientState, TokenAbsent
from .ingest import MAX_UINT256
from .ledger import Ledger, LedgerConfig, LedgerSnapshot, OnInsufficient, TokenState


class RiskLevel(str, Enum):
    NO_RISK = "NoRisk"
    LOW_RISK = "LowRisk"
    HIGH_RISK = "HighRisk"

    @property
    def severity(self) -> int:
        return _SEVERITY[self]


_SEVERITY = {RiskLevel.NO_RISK: 0, RiskLevel.LOW_RISK: 1, RiskLevel.HIGH_RISK: 2}


def risk_amount(state: TokenState, owner: str, spender: str) -> int:
    """Tokens of ``owner`` that ``spender`` could move right now."""
    return min(state.allowance.get((owner, spender), 0), state.balance_of.get(owner, 0))


def level_of(allowance: int, balance: int) -> RiskLevel:
    if allowance == 0:
        return RiskLevel.NO_RISK
    if balance == 0:
        return RiskLevel.LOW_RISK
    return RiskLevel.HIGH_RISK


def risk_level(state: TokenState, owner: str, spender: str) -> RiskLevel:
    return level_of(state.allowance.get((owner, spender), 0), state.balance_of.get(owner, 0))


def percent(count: int, total: int) -> Decimal:
    """``100 * count / total`` at one decimal, rounded half up, computed exactly."""
    if total <= 0:
        return Decimal("0.0")
    tenths = (2000 * count + total) // (2 * total)
    return Decimal(tenths).scaleb(-1)


class RiskTuple(NamedTuple):
    owner: str
    spender: str
    token: str
    risk_amount: int
    risk_level: RiskLevel


@dataclass
class RiskSnapshot:
    block: int
    tuples: list
    tokens: frozenset

    def for_token(self, token):
        if token not in self.tokens:
            raise TokenAbsent(f"token {token} not present at block {self.block}")
        return [t for t in self.tuples if t.token == token]


def build_risk_snapshot(snapshot: LedgerSnapshot) -> RiskSnapshot:
    """Evaluate every (owner, spender) pair with approval history at a checkpoint."""
    tuples = []
    for token in sorted(snapshot.tokens):
        st = snapshot.tokens[token]
        for owner, spender in sorted(st.approval_history):
            tuples.append(RiskTuple(owner, spender, token,
                                    risk_amount(st, owner, spender), risk_level(st, owner, spender)))
    return RiskSnapshot(snapshot.block, tuples, frozenset(snapshot.tokens))


@dataclass
class RiskDistribution:
    token: str
    users: int
    n_no: int
    n_low: int
    n_high: int

    @property
    def pct_no(self) -> Decimal:
        return percent(self.n_no, self.users)

    @property
    def pct_low(self) -> Decimal:
        return percent(self.n_low, self.users)

    @property
    def pct_high(self) -> Decimal:
        return percent(self.n_high, self.users)

    def as_tuple(self):
        return (self.users, self.pct_no, self.pct_low, self.pct_high)


def user_levels(tuples: Iterable[RiskTuple]) -> dict:
    """Fold per-spender levels into one level per owner (worst case wins)."""
    worst = {}
    for t in tuples:
        cur = worst.get(t.owner)
        if cur is None or t.risk_level.severity > cur.severity:
            worst[t.owner] = t.risk_level
    return worst


def risk_distribution(snapshot: RiskSnapshot, token: str) -> RiskDistribution:
    levels = user_levels(snapshot.for_token(token))
    counts = {lvl: 0 for lvl in RiskLevel}
    for lvl in levels.values():
        counts[lvl] += 1
    return RiskDistribution(token, len(levels), counts[RiskLevel.NO_RISK],
                            counts[RiskLevel.LOW_RISK], counts[RiskLevel.HIGH_RISK])


class SeriesRow(NamedTuple):
    block: int
    token: str
    metric: str
    value: int


def risk_series(snapshots: list, token: str, aggregation: str = "sum_risk_amount") -> list:
    """
    One row per checkpoint (``sum_risk_amount``) or three per checkpoint
    (``level_counts``: users_no / users_low / users_high). Checkpoints taken
    before the token first appeared contribute zeros.
    """
    if not snapshots:
        raise ValueError("risk_series needs at least one snapshot")
    if aggregation not in ("sum_risk_amount", "level_counts"):
        raise ValueError(f"unknown aggregation {aggregation!r}")
    if not any(token in s.tokens for s in snapshots):
        raise TokenAbsent(f"token {token} absent from every snapshot")
    rows = []
    for snap in snapshots:
        tuples = [t for t in snap.tuples if t.token == token]
        if aggregation == "sum_risk_amount":
            rows.append(SeriesRow(snap.block, token, "sum_risk_amount", sum(t.risk_amount for t in tuples)))
        else:
            levels = list(user_levels(tuples).values())
            for lvl, name in ((RiskLevel.NO_RISK, "users_no"), (RiskLevel.LOW_RISK, "users_low"),
                              (RiskLevel.HIGH_RISK, "users_high")):
                rows.append(SeriesRow(snap.block, token, name, levels.count(lvl)))
    return rows


# -- attacker oracle -------------------------------------------------------

ATTACKER = "0x" + "a7" * 20


def _try_steal(state: TokenState, owner, spender, amount, config) -> bool:
    probe = Ledger(LedgerConfig(config.infinite_allowance_no_decrement, OnInsufficient.HALT))
    st = probe.token("token")
    if state.balance_of.get(owner):
        st.balance_of[owner] = state.balance_of[owner]
    if state.allowance.get((owner, spender)):
        st.allowance[(owner, spender)] = state.allowance[(owner, spender)]
    try:
        probe.apply_transfer_from(ExecutionEvent(owner, spender, ATTACKER, "token", amount, 0, 0, ""))
    except InsufficientState:
        return False
    return True


def _max_feasible(state, owner, spender, config) -> int:
    # largest amount a single transferFrom accepts; feasibility is monotone in amount
    lo, hi = 0, MAX_UINT256
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if _try_steal(state, owner, spender, mid, config):
            lo = mid
        else:
            hi = mid - 1
    return lo


def attacker_oracle(state: TokenState, spender: str, config: LedgerConfig = LedgerConfig()):
    """
    Simulate a malicious ``spender`` repeatedly calling
    ``transferFrom(owner, attacker, x)`` with the largest ``x`` the ledger
    accepts, until nothing more moves. Works on a private copy of ``state``.

    Returns ``(stolen_per_owner, total)``.
    """
    work = state.copy()
    ledger = Ledger(LedgerConfig(config.infinite_allowance_no_decrement, OnInsufficient.HALT))
    ledger.tokens["token"] = work
    stolen = {}
    owners = sorted({o for (o, s) in work.allowance if s == spender})
    for owner in owners:
        if owner == ATTACKER:
            continue
        taken = 0
        while True:
            x = _max_feasible(work, owner, spender, config)
            if x == 0:
                break
            ledger.apply_transfer_from(ExecutionEvent(owner, spender, ATTACKER, "token", x, 0, 0, ""))
            taken += x
        stolen[owner] = taken
    return stolen, sum(stolen.values())


def drained_amounts(events: Iterable, spender: str, token: Optional[str] = None,
                    from_block: int = 0, to_block: Optional[int] = None) -> dict:
    """Sum of ``transferFrom`` amounts per owner executed by ``spender`` in a block window."""
    out = {}
    for ev in events:
        if type(ev) is not ExecutionEvent or ev.spender != spender:
            continue
        if token is not None and ev.token != token:
            continue
        if ev.block_number < from_block or (to_block is not None and ev.block_number > to_block):
            continue
        out[ev.owner] = out.get(ev.owner, 0) + ev.amount
    return out
