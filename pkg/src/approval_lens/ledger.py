"""
Deterministic replay of decoded events into per-token ``balanceOf`` /
``allowance`` tables.

Semantics follow standard ERC20:

* ``approve`` overwrites ``allowance[owner][spender]``;
* ``transferFrom`` moves ``amount`` from owner to receiver and decrements the
  allowance (optionally not when it sits at the uint256 maximum);
* ``transfer`` moves balances only. A transfer *from* the zero address is a
  mint, a transfer or transferFrom *to* the zero address is a burn.

State is sparse: missing keys read as zero and zero entries are pruned, so
two states holding the same values always compare (and dump) equal.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional

from .decode import ApprovalEvent, Decoder, ExecutionEvent, TransferEvent, UaConfig
from .errors import InsufficientState, OrderViolation
from .ingest import MAX_UINT256, ZERO_ADDRESS, TokenRegistry, TxRecord


class OnInsufficient(str, Enum):
    SKIP = "skip_and_count"
    CLAMP = "clamp"
    HALT = "halt"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"skip": cls.SKIP, "skip_and_count": cls.SKIP, "clamp": cls.CLAMP, "halt": cls.HALT}
        try:
            return aliases[value]
        except KeyError:
            raise ValueError(f"unknown on_insufficient policy {value!r}") from None


@dataclass(frozen=True)
class LedgerConfig:
    infinite_allowance_no_decrement: bool = False
    on_insufficient: OnInsufficient = OnInsufficient.SKIP

    def __post_init__(self):
        object.__setattr__(self, "on_insufficient", OnInsufficient.parse(self.on_insufficient))


class TokenState:
    """``balanceOf`` and ``allowance`` of one token contract."""

    __slots__ = ("balance_of", "allowance", "minted", "burned", "approval_history")

    def __init__(self):
        self.balance_of = {}
        self.allowance = {}
        self.minted = 0
        self.burned = 0
        # (owner, spender) pairs that have ever been approved
        self.approval_history = set()

    def balance(self, owner) -> int:
        return self.balance_of.get(owner, 0)

    def allowed(self, owner, spender) -> int:
        return self.allowance.get((owner, spender), 0)

    def copy(self) -> "TokenState":
        new = TokenState()
        new.balance_of = dict(self.balance_of)
        new.allowance = dict(self.allowance)
        new.minted = self.minted
        new.burned = self.burned
        new.approval_history = set(self.approval_history)
        return new

    def total_balance(self) -> int:
        return sum(self.balance_of.values())

    def __eq__(self, other):
        if not isinstance(other, TokenState):
            return NotImplemented
        return self.balance_of == other.balance_of and self.allowance == other.allowance

    def __repr__(self):
        return f"TokenState(balances={len(self.balance_of)}, allowances={len(self.allowance)})"


@dataclass
class LedgerStats:
    approvals: int = 0
    executions: int = 0
    transfers: int = 0
    mints: int = 0
    burns: int = 0
    inconsistent: int = 0
    clamped: int = 0

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class LedgerSnapshot:
    """Deep copy of all token states at the end of ``block``."""

    block: int
    tokens: dict

    def dump_lines(self) -> list:
        return dump_state(self.tokens, self.block)


class Ledger:
    def __init__(self, config: LedgerConfig = LedgerConfig()):
        self.config = config
        self.tokens = {}
        self.cursor = (-1, -1)
        self.stats = LedgerStats()
        self.inconsistent_events = []

    def token(self, address) -> TokenState:
        st = self.tokens.get(address)
        if st is None:
            st = self.tokens[address] = TokenState()
        return st

    def _advance(self, ev):
        key = (ev.block_number, ev.tx_index)
        if key < self.cursor:
            raise OrderViolation(f"event at {key} precedes ledger cursor {self.cursor}")
        self.cursor = key

    def _infeasible(self, ev, feasible):
        """Resolve an infeasible debit; returns the amount to apply (0 = skip)."""
        policy = self.config.on_insufficient
        if policy is OnInsufficient.HALT:
            raise InsufficientState(f"infeasible {type(ev).__name__} in tx {ev.tx_hash}: "
                                    f"amount {ev.amount}, feasible {feasible}")
        if policy is OnInsufficient.CLAMP:
            self.stats.clamped += 1
            return feasible
        self.stats.inconsistent += 1
        self.inconsistent_events.append(ev)
        return 0

    def _move(self, st, src, dst, amount):
        bal = st.balance_of
        if src == ZERO_ADDRESS:
            st.minted += amount
            self.stats.mints += 1
        else:
            left = bal[src] - amount
            if left:
                bal[src] = left
            else:
                del bal[src]
        if dst == ZERO_ADDRESS:
            st.burned += amount
            self.stats.burns += 1
        elif amount:
            bal[dst] = bal.get(dst, 0) + amount

    def apply_approval(self, ev: ApprovalEvent):
        self._advance(ev)
        st = self.token(ev.token)
        pair = (ev.sender, ev.spender)
        st.approval_history.add(pair)
        if ev.amount:
            st.allowance[pair] = ev.amount
        else:
            st.allowance.pop(pair, None)
        self.stats.approvals += 1

    def apply_transfer_from(self, ev: ExecutionEvent):
        self._advance(ev)
        st = self.token(ev.token)
        pair = (ev.owner, ev.spender)
        allowed = st.allowance.get(pair, 0)
        balance = st.balance_of.get(ev.owner, 0)
        amount = ev.amount
        unlimited = self.config.infinite_allowance_no_decrement and allowed == MAX_UINT256
        if amount > allowed or amount > balance:
            amount = self._infeasible(ev, min(allowed, balance))
            if not amount:
                return
        self._move_owned(st, ev.owner, ev.receiver, amount, balance)
        if not unlimited:
            left = allowed - amount
            if left:
                st.allowance[pair] = left
            else:
                st.allowance.pop(pair, None)
        self.stats.executions += 1

    def _move_owned(self, st, src, dst, amount, balance):
        # src balance already known to cover amount; src may be ZERO only if funded
        bal = st.balance_of
        left = balance - amount
        if left:
            bal[src] = left
        else:
            bal.pop(src, None)
        if dst == ZERO_ADDRESS:
            st.burned += amount
            self.stats.burns += 1
        elif amount:
            bal[dst] = bal.get(dst, 0) + amount

    def apply_transfer(self, ev: TransferEvent):
        self._advance(ev)
        st = self.token(ev.token)
        amount = ev.amount
        if ev.sender == ZERO_ADDRESS:
            self._move(st, ZERO_ADDRESS, ev.receiver, amount)
            self.stats.transfers += 1
            return
        balance = st.balance_of.get(ev.sender, 0)
        if amount > balance:
            amount = self._infeasible(ev, balance)
            if not amount:
                return
        self._move_owned(st, ev.sender, ev.receiver, amount, balance)
        self.stats.transfers += 1

    def apply(self, ev):
        t = type(ev)
        if t is ExecutionEvent:
            self.apply_transfer_from(ev)
        elif t is TransferEvent:
            self.apply_transfer(ev)
        elif t is ApprovalEvent:
            self.apply_approval(ev)
        else:
            raise TypeError(f"not an event: {ev!r}")

    def snapshot(self, block: int) -> LedgerSnapshot:
        return LedgerSnapshot(block, {t: st.copy() for t, st in self.tokens.items()})


def dump_state(tokens: dict, block: int) -> list:
    """Snapshot dump lines, one per token, entries sorted by address."""
    lines = []
    for token in sorted(tokens):
        st = tokens[token]
        balances = ",".join(
            '{"addr":"%s","v":"%d"}' % (a, v) for a, v in sorted(st.balance_of.items()) if v
        )
        allowances = ",".join(
            '{"owner":"%s","spender":"%s","v":"%d"}' % (o, s, v)
            for (o, s), v in sorted(st.allowance.items()) if v
        )
        lines.append('{"block":%d,"token":"%s","balances":[%s],"allowances":[%s]}'
                     % (block, token, balances, allowances))
    return lines


def load_state_dump(lines: Iterable[str]) -> dict:
    """Parse snapshot dump lines back into ``{block: {token: TokenState}}``."""
    out = {}
    for line in lines:
        if not line.strip():
            continue
        obj = json.loads(line)
        st = TokenState()
        st.balance_of = {e["addr"]: int(e["v"]) for e in obj["balances"]}
        st.allowance = {(e["owner"], e["spender"]): int(e["v"]) for e in obj["allowances"]}
        out.setdefault(obj["block"], {})[obj["token"]] = st
    return out


@dataclass
class ReplayResult:
    ledger: Ledger
    events: Optional[list]
    snapshots: list
    decode_stats: object
    final_block: Optional[int] = None

    @property
    def tokens(self):
        return self.ledger.tokens

    def final_snapshot(self) -> LedgerSnapshot:
        block = self.final_block if self.final_block is not None else -1
        return self.ledger.snapshot(block)


def replay(
    records: Iterable[TxRecord],
    registry: TokenRegistry,
    ua_config: UaConfig = UaConfig(),
    ledger_config: LedgerConfig = LedgerConfig(),
    checkpoints: Iterable[int] = (),
    *,
    include_failed: bool = False,
    keep_events: bool = True,
    on_event: Optional[Callable] = None,
) -> ReplayResult:
    """
    Decode and apply every record in order.

    A snapshot is taken at the end of each checkpoint block, i.e. just before
    the first record of a later block (or at the end of the stream).
    ``on_event(event, ledger)`` is called after each applied event; with
    ``keep_events=False`` the event log is not retained, keeping memory
    proportional to the state.
    """
    checkpoints = list(checkpoints)
    if checkpoints != sorted(checkpoints):
        raise ValueError("checkpoints must be sorted ascending")
    decoder = Decoder(registry, ua_config, include_failed=include_failed)
    ledger = Ledger(ledger_config)
    events = [] if keep_events else None
    snapshots = []
    pending = list(reversed(checkpoints))
    decode = decoder.decode
    apply_ = ledger.apply
    last_block = None

    for rec in records:
        block = rec.block_number
        while pending and pending[-1] < block:
            snapshots.append(ledger.snapshot(pending.pop()))
        last_block = block
        evs = decode(rec)
        if not evs:
            # still advance the cursor so out-of-order records are caught
            key = (block, rec.tx_index)
            if key < ledger.cursor:
                raise OrderViolation(f"record at {key} precedes ledger cursor {ledger.cursor}")
            ledger.cursor = key
            continue
        for ev in evs:
            apply_(ev)
            if on_event is not None:
                on_event(ev, ledger)
        if events is not None:
            events.extend(evs)

    while pending:
        snapshots.append(ledger.snapshot(pending.pop()))
    return ReplayResult(ledger, events, snapshots, decoder.stats, last_block)
