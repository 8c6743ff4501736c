"""
Calldata decoding for ERC20 ``approve``, ``transferFrom`` and ``transfer``.

Detection is purely selector based. ``approve`` is only recognised on the
external (depth-0) frame and only for tokens not tagged ERC721 in the
registry, since ERC721 shares the same selector. ``transferFrom`` and
``transfer`` are recognised at any depth: spending normally happens inside a
DApp contract call.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

from .ingest import MAX_UINT256, TokenMeta, TokenRegistry, TokenStandard, TxRecord, TxStatus, to_address
from .keccak import keccak256


def selector_of(signature: str) -> bytes:
    """First four bytes of keccak-256 over the canonical ASCII signature."""
    return keccak256(signature.encode("ascii"))[:4]


APPROVE = selector_of("approve(address,uint256)")
TRANSFER_FROM = selector_of("transferFrom(address,address,uint256)")
TRANSFER = selector_of("transfer(address,uint256)")

_APPROVE_LEN = 4 + 2 * 32
_TRANSFER_FROM_LEN = 4 + 3 * 32
_TRANSFER_LEN = 4 + 2 * 32


class ApprovalKind(str, Enum):
    UA = "UA"
    ZA = "ZA"
    OA = "OA"


class UaMode(str, Enum):
    STRICT = "strict"
    THRESHOLD = "threshold"


@dataclass(frozen=True)
class UaConfig:
    """
    Which approval amounts count as unlimited.

    ``strict`` accepts only the uint256 maximum or the token's registered total
    supply. ``threshold`` additionally accepts any amount ``>= threshold``.
    """

    mode: UaMode = UaMode.STRICT
    threshold: int = 1 << 248

    def __post_init__(self):
        object.__setattr__(self, "mode", UaMode(self.mode))
        if not 1 <= self.threshold <= MAX_UINT256:
            raise ValueError("UA threshold must lie in [1, 2**256 - 1]")


class RawApproval(NamedTuple):
    sender: str
    spender: str
    token: str
    amount: int


class ApprovalEvent(NamedTuple):
    sender: str
    spender: str
    token: str
    amount: int
    kind: ApprovalKind
    block_number: int
    tx_index: int
    tx_hash: str
    frame: int = 0

    @property
    def key(self):
        return (self.block_number, self.tx_index, self.frame)


class ExecutionEvent(NamedTuple):
    owner: str
    spender: str
    receiver: str
    token: str
    amount: int
    block_number: int
    tx_index: int
    tx_hash: str
    frame: int = 0

    @property
    def key(self):
        return (self.block_number, self.tx_index, self.frame)


class TransferEvent(NamedTuple):
    token: str
    sender: str
    receiver: str
    amount: int
    block_number: int
    tx_index: int
    tx_hash: str
    frame: int = 0

    @property
    def key(self):
        return (self.block_number, self.tx_index, self.frame)


@dataclass
class DecodeStats:
    records: int = 0
    skipped_failed: int = 0
    malformed_calldata: int = 0
    internal_approvals: int = 0
    erc721_approvals: int = 0
    approvals: int = 0
    executions: int = 0
    transfers: int = 0

    def as_dict(self):
        return dict(self.__dict__)


def _addr(word: bytes) -> str:
    # low 20 bytes of a 32-byte argument word
    return "0x" + word[12:32].hex()


def decode_approve(
    record: TxRecord,
    registry: TokenRegistry,
    stats: Optional[DecodeStats] = None,
    *,
    include_failed: bool = False,
) -> Optional[RawApproval]:
    if not include_failed and not record.succeeded:
        return None
    frame = record.frames[0]
    data = frame.input
    if data[:4] != APPROVE:
        return None
    if len(data) < _APPROVE_LEN:
        if stats is not None:
            stats.malformed_calldata += 1
        return None
    if registry.lookup(frame.callee).standard is TokenStandard.ERC721:
        if stats is not None:
            stats.erc721_approvals += 1
        return None
    return RawApproval(frame.caller, "0x" + data[16:36].hex(), frame.callee, int.from_bytes(data[36:68], "big"))


def decode_execution(
    record: TxRecord,
    stats: Optional[DecodeStats] = None,
    *,
    include_failed: bool = False,
) -> list:
    if not include_failed and not record.succeeded:
        return []
    out = []
    for pos, f in enumerate(record.frames):
        data = f.input
        if data[:4] != TRANSFER_FROM:
            continue
        if len(data) < _TRANSFER_FROM_LEN:
            if stats is not None:
                stats.malformed_calldata += 1
            continue
        out.append(ExecutionEvent(
            _addr(data[4:36]), f.caller, _addr(data[36:68]), f.callee,
            int.from_bytes(data[68:100], "big"),
            record.block_number, record.tx_index, record.tx_hash, pos,
        ))
    return out


def decode_transfer(
    record: TxRecord,
    stats: Optional[DecodeStats] = None,
    *,
    include_failed: bool = False,
) -> list:
    if not include_failed and not record.succeeded:
        return []
    out = []
    for pos, f in enumerate(record.frames):
        data = f.input
        if data[:4] != TRANSFER:
            continue
        if len(data) < _TRANSFER_LEN:
            if stats is not None:
                stats.malformed_calldata += 1
            continue
        out.append(TransferEvent(
            f.callee, f.caller, _addr(data[4:36]), int.from_bytes(data[36:68], "big"),
            record.block_number, record.tx_index, record.tx_hash, pos,
        ))
    return out


def classify_approval(amount: int, token_meta: TokenMeta, config: UaConfig = UaConfig()) -> ApprovalKind:
    if amount == 0:
        return ApprovalKind.ZA
    if amount == MAX_UINT256 or (token_meta.total_supply is not None and amount == token_meta.total_supply):
        return ApprovalKind.UA
    if config.mode is UaMode.THRESHOLD and amount >= config.threshold:
        return ApprovalKind.UA
    return ApprovalKind.OA


class Decoder:
    """
    Single-pass decoder producing every event of a record in frame order.

    Equivalent to calling the three ``decode_*`` functions and merging by
    frame position, but walks the frames once; this is the hot path of a
    full-corpus replay.
    """

    def __init__(self, registry: TokenRegistry, ua_config: UaConfig = UaConfig(), *, include_failed=False):
        self.registry = registry
        self.ua_config = ua_config
        self.include_failed = include_failed
        self.stats = DecodeStats()
        self._erc721 = registry.erc721_addresses()

    def decode(self, record: TxRecord) -> list:
        stats = self.stats
        stats.records += 1
        if record.status is not TxStatus.SUCCEEDED and not self.include_failed:
            stats.skipped_failed += 1
            return []
        events = []
        block, index, tx_hash = record.block_number, record.tx_index, record.tx_hash
        ops = _OPS
        pos = -1
        for f in record.frames:
            pos += 1
            data = f.input
            op = ops.get(data[:4])
            if op is None:
                continue
            n = len(data)
            if op == 1:
                if n < _TRANSFER_FROM_LEN:
                    stats.malformed_calldata += 1
                    continue
                events.append(_new(ExecutionEvent, (
                    "0x" + data[16:36].hex(), f.caller, "0x" + data[48:68].hex(), f.callee,
                    int.from_bytes(data[68:100], "big"), block, index, tx_hash, pos,
                )))
                stats.executions += 1
            elif op == 2:
                if n < _TRANSFER_LEN:
                    stats.malformed_calldata += 1
                    continue
                events.append(_new(TransferEvent, (
                    f.callee, f.caller, "0x" + data[16:36].hex(),
                    int.from_bytes(data[36:68], "big"), block, index, tx_hash, pos,
                )))
                stats.transfers += 1
            else:
                if pos:
                    stats.internal_approvals += 1
                    continue
                if n < _APPROVE_LEN:
                    stats.malformed_calldata += 1
                    continue
                if f.callee in self._erc721:
                    stats.erc721_approvals += 1
                    continue
                amount = int.from_bytes(data[36:68], "big")
                kind = self._kind(amount, f.callee)
                events.append(_new(ApprovalEvent, (
                    f.caller, "0x" + data[16:36].hex(), f.callee, amount, kind,
                    block, index, tx_hash, pos,
                )))
                stats.approvals += 1
        return events

    def _kind(self, amount, token):
        if amount == 0:
            return ApprovalKind.ZA
        if amount == MAX_UINT256:
            return ApprovalKind.UA
        return classify_approval(amount, self.registry.lookup(token), self.ua_config)


_OPS = {TRANSFER_FROM: 1, TRANSFER: 2, APPROVE: 3}
_new = tuple.__new__


def decode_record(record: TxRecord, registry: TokenRegistry, ua_config: UaConfig = UaConfig()) -> list:
    return Decoder(registry, ua_config).decode(record)


# -- diagnostic dump -------------------------------------------------------

def event_to_json(ev) -> str:
    if isinstance(ev, ApprovalEvent):
        return (
            '{"type":"approve","token":"%s","from":"%s","spender":"%s","amount":"%d",'
            '"kind":"%s","block":%d,"index":%d,"tx":"%s"}'
            % (ev.token, ev.sender, ev.spender, ev.amount, ev.kind.value,
               ev.block_number, ev.tx_index, ev.tx_hash)
        )
    if isinstance(ev, ExecutionEvent):
        return (
            '{"type":"exec","token":"%s","owner":"%s","spender":"%s","receiver":"%s",'
            '"amount":"%d","block":%d,"index":%d,"tx":"%s"}'
            % (ev.token, ev.owner, ev.spender, ev.receiver, ev.amount,
               ev.block_number, ev.tx_index, ev.tx_hash)
        )
    if isinstance(ev, TransferEvent):
        return (
            '{"type":"transfer","token":"%s","from":"%s","to":"%s","amount":"%d",'
            '"block":%d,"index":%d,"tx":"%s"}'
            % (ev.token, ev.sender, ev.receiver, ev.amount,
               ev.block_number, ev.tx_index, ev.tx_hash)
        )
    raise TypeError(f"not an event: {ev!r}")


def event_from_json(line: str, frame: int = 0):
    """Inverse of :func:`event_to_json` (frame position is not serialized)."""
    obj = json.loads(line)
    t = obj["type"]
    common = (int(obj["block"]), int(obj["index"]), obj["tx"], frame)
    if t == "approve":
        return ApprovalEvent(to_address(obj["from"]), to_address(obj["spender"]), to_address(obj["token"]),
                             int(obj["amount"]), ApprovalKind(obj["kind"]), *common)
    if t == "exec":
        return ExecutionEvent(to_address(obj["owner"]), to_address(obj["spender"]), to_address(obj["receiver"]),
                              to_address(obj["token"]), int(obj["amount"]), *common)
    if t == "transfer":
        return TransferEvent(to_address(obj["token"]), to_address(obj["from"]), to_address(obj["to"]),
                             int(obj["amount"]), *common)
    raise ValueError(f"unknown event type {t!r}")
