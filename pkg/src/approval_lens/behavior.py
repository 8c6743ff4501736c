"""
Per-(owner, spender, token) approval/spend sequences and their behavior modes.

Modes, by the shape of the A (approve) / E (transferFrom) string:

    M1  A E             one-to-one
    M2  A E E ...       one-to-many
    M3  A ...           only approvals
    M4  A A ... E       many-to-one
    M5  anything else   compound

A sequence opening with E is *anomalous*: its approval predates the
analysed window, so it is reported separately instead of being forced into
M5.

Good practice leaves no residual allowance. It is a concatenation of
``UA E+ ZA`` blocks (unlimited approval, spend, revoke) and ``OA E+`` blocks
whose executions sum exactly to the approved amount. M1/M2 are the single
``OA`` block cases; M3 and M4 are never good.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Iterable, NamedTuple, Optional

from .decode import ApprovalEvent, ApprovalKind, ExecutionEvent
from .ingest import MAX_UINT256
from .errors import EmptySequence, SequenceTooLong
from .risk import percent


class BehaviorEvent(NamedTuple):
    kind: str  # "A" or "E"
    approval: Optional[ApprovalKind]
    amount: int
    block_number: int = 0
    tx_index: int = 0
    tx_hash: str = ""
    frame: int = 0

    @property
    def key(self):
        return (self.block_number, self.tx_index, self.frame)


def A(kind, amount=None, block=0, index=0, tx_hash="", frame=0) -> BehaviorEvent:
    kind = ApprovalKind(kind)
    if kind is ApprovalKind.ZA:
        amount = 0
    elif amount is None:
        if kind is not ApprovalKind.UA:
            raise ValueError("an OA approval needs an amount")
        amount = MAX_UINT256
    return BehaviorEvent("A", kind, amount, block, index, tx_hash, frame)


def E(amount, block=0, index=0, tx_hash="", frame=0) -> BehaviorEvent:
    return BehaviorEvent("E", None, amount, block, index, tx_hash, frame)


class Mode(str, Enum):
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    M4 = "M4"
    M5 = "M5"
    ANOMALOUS = "Anomalous"


FIVE_MODES = (Mode.M1, Mode.M2, Mode.M3, Mode.M4, Mode.M5)


class PatternBlock(NamedTuple):
    start: int
    stop: int
    pattern: str  # "UA-E-ZA" or "OA-E"


@dataclass
class BehaviorSequence:
    owner: str
    spender: str
    token: str
    events: list = field(default_factory=list)
    mode: Optional[Mode] = None
    good_practice: Optional[bool] = None
    decomposition: Optional[list] = None

    @property
    def key(self):
        return (self.owner, self.spender, self.token)

    def classify(self) -> "BehaviorSequence":
        self.mode = classify_mode(self.events)
        self.good_practice, self.decomposition = check_good_practice(self.events, self.mode)
        return self


def extract_sequences(event_log: Iterable, pairs: Optional[Iterable] = None) -> list:
    """
    Group approvals and executions by (owner, spender, token), keeping log
    order inside each group. Direct transfers are dropped. ``pairs``
    restricts output to the listed (spender, token) pairs.

    Sequences are returned sorted by (owner, spender, token).
    """
    wanted = None if pairs is None else {tuple(p) for p in pairs}
    groups = {}
    for ev in event_log:
        t = type(ev)
        if t is ApprovalEvent:
            key = (ev.sender, ev.spender, ev.token)
            bev = BehaviorEvent("A", ev.kind, ev.amount, ev.block_number, ev.tx_index, ev.tx_hash, ev.frame)
        elif t is ExecutionEvent:
            key = (ev.owner, ev.spender, ev.token)
            bev = BehaviorEvent("E", None, ev.amount, ev.block_number, ev.tx_index, ev.tx_hash, ev.frame)
        else:
            continue
        if wanted is not None and (key[1], key[2]) not in wanted:
            continue
        seq = groups.get(key)
        if seq is None:
            seq = groups[key] = BehaviorSequence(*key)
        seq.events.append(bev)
    for seq in groups.values():
        seq.events.sort(key=lambda e: e.key)
    return [groups[k] for k in sorted(groups)]


def classify_mode(events) -> Mode:
    if not events:
        raise EmptySequence("cannot classify an empty sequence")
    kinds = [e.kind for e in events]
    if kinds[0] == "E":
        return Mode.ANOMALOUS
    n_e = kinds.count("E")
    n_a = len(kinds) - n_e
    if n_e == 0:
        return Mode.M3
    if n_a == 1:
        # kinds[0] is the only A, so everything after it is E
        return Mode.M1 if n_e == 1 else Mode.M2
    if n_e == 1 and kinds[-1] == "E":
        return Mode.M4
    return Mode.M5


def _scan_blocks(events) -> Optional[list]:
    """Left-to-right tiling into good-practice blocks, or None if impossible.

    A block always runs from an approval up to (but excluding) the next
    approval, except that a UA block also swallows its closing ZA, so block
    boundaries are forced and no search is needed.
    """
    blocks = []
    i, n = 0, len(events)
    while i < n:
        head = events[i]
        if head.kind != "A" or head.approval is ApprovalKind.ZA:
            return None
        j = i + 1
        spent = 0
        while j < n and events[j].kind == "E":
            spent += events[j].amount
            j += 1
        if j == i + 1:
            return None
        if head.approval is ApprovalKind.UA:
            if j >= n or events[j].approval is not ApprovalKind.ZA:
                return None
            blocks.append(PatternBlock(i, j + 1, "UA-E-ZA"))
            i = j + 1
        else:
            if spent != head.amount:
                return None
            blocks.append(PatternBlock(i, j, "OA-E"))
            i = j
    return blocks


def check_good_practice(events, mode: Optional[Mode] = None):
    """Return ``(verdict, decomposition)``; decomposition is None unless good."""
    if mode is None:
        mode = classify_mode(events)
    if mode in (Mode.M3, Mode.M4, Mode.ANOMALOUS):
        return False, None
    if mode in (Mode.M1, Mode.M2):
        head = events[0]
        if head.approval is ApprovalKind.OA and head.amount == sum(e.amount for e in events[1:]):
            return True, [PatternBlock(0, len(events), "OA-E")]
        return False, None
    blocks = _scan_blocks(events)
    return (blocks is not None), blocks


BRUTE_FORCE_LIMIT = 12


def _block_ok(block) -> bool:
    head, body = block[0], block[1:]
    if head.kind != "A":
        return False
    if head.approval is ApprovalKind.UA:
        return (
            len(body) >= 2
            and body[-1].kind == "A" and body[-1].approval is ApprovalKind.ZA
            and all(e.kind == "E" for e in body[:-1])
        )
    if head.approval is ApprovalKind.OA:
        return (
            len(body) >= 1
            and all(e.kind == "E" for e in body)
            and sum(e.amount for e in body) == head.amount
        )
    return False


def brute_force_good_practice(events) -> bool:
    """Try every way of cutting the sequence into contiguous blocks."""
    n = len(events)
    if n > BRUTE_FORCE_LIMIT:
        raise SequenceTooLong(f"brute force limited to {BRUTE_FORCE_LIMIT} events, got {n}")
    if n == 0:
        return False
    for k in range(n):
        for cuts in combinations(range(1, n), k):
            bounds = (0, *cuts, n)
            if all(_block_ok(events[a:b]) for a, b in zip(bounds, bounds[1:])):
                return True
    return False


# -- distributions ---------------------------------------------------------

@dataclass
class PairRow:
    spender: str
    token: str
    identical_users: int
    counts: dict
    n_anomalous: int

    @property
    def n_classified(self) -> int:
        return sum(self.counts.values())

    def pct(self, mode: Mode):
        return percent(self.counts[mode], self.n_classified)


@dataclass
class BehaviorDistribution:
    rows: list
    totals: dict
    n_anomalous: int
    identical_users: int

    @property
    def n_classified(self) -> int:
        return sum(self.totals.values())

    def pct(self, mode: Mode):
        return percent(self.totals[mode], self.n_classified)


def behavior_distribution(sequences: Iterable[BehaviorSequence], pairs: Optional[Iterable] = None) -> BehaviorDistribution:
    """
    Mode shares per (spender, token) pair plus global totals. Anomalous
    sequences are counted separately and excluded from the percentages.
    ``pairs=None`` reports every pair present, sorted.
    """
    by_pair = {}
    for seq in sequences:
        by_pair.setdefault((seq.spender, seq.token), []).append(seq)
    pair_list = sorted(by_pair) if pairs is None else [tuple(p) for p in pairs]

    rows = []
    totals = {m: 0 for m in FIVE_MODES}
    n_anom = 0
    owners = set()
    for pair in pair_list:
        seqs = by_pair.get(pair, [])
        counts = {m: 0 for m in FIVE_MODES}
        anomalous = 0
        for s in seqs:
            if s.mode is None:
                s.classify()
            if s.mode is Mode.ANOMALOUS:
                anomalous += 1
            else:
                counts[s.mode] += 1
        for m in FIVE_MODES:
            totals[m] += counts[m]
        n_anom += anomalous
        pair_owners = {s.owner for s in seqs}
        owners |= pair_owners
        rows.append(PairRow(pair[0], pair[1], len(pair_owners), counts, anomalous))
    return BehaviorDistribution(rows, totals, n_anom, len(owners))
