"""
Corpus and token-registry loading.

A corpus is line-delimited JSON, one external transaction per line, with the
internal call frames flattened in depth-first execution order::

    {"tx_hash":"0x..","block":7,"index":0,"nonce":3,"status":"ok",
     "frames":[{"caller":"0x..","callee":"0x..","input":"0x..","depth":0}, ...]}

Addresses are carried as normalized 0x-prefixed lowercase hex strings. For a
fixed-width lowercase encoding, string order is identical to byte order, so
they can be compared, sorted and hashed directly.
"""
from __future__ import annotations

import heapq
import json
import os
import re
import tempfile
from dataclasses import dataclass
from enum import Enum
from itertools import islice
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence, Union

import orjson

from .errors import (
    DuplicateToken,
    MalformedRecord,
    MalformedRegistry,
    OrderViolation,
    SourceUnavailable,
)

MAX_UINT256 = (1 << 256) - 1
ZERO_ADDRESS = "0x" + "0" * 40

_ADDRESS_RE = re.compile(r"0x[0-9a-f]{40}\Z")
_HASH_RE = re.compile(r"0x[0-9a-f]{64}\Z")
_KEY_RE = re.compile(rb'"block":(\d+),"index":(\d+)')

PathLike = Union[str, os.PathLike]


def is_address(value) -> bool:
    return isinstance(value, str) and _ADDRESS_RE.match(value) is not None


def to_address(value) -> str:
    """Normalize a 20-byte address given as bytes or hex text."""
    if isinstance(value, (bytes, bytearray)):
        if len(value) != 20:
            raise ValueError(f"address must be 20 bytes, got {len(value)}")
        return "0x" + bytes(value).hex()
    if not isinstance(value, str):
        raise TypeError(f"cannot interpret {type(value).__name__} as an address")
    text = value.lower()
    if not _ADDRESS_RE.match(text):
        raise ValueError(f"invalid address {value!r}")
    return text


def check_amount(value: int) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= MAX_UINT256:
        raise ValueError(f"token amount out of uint256 range: {value!r}")
    return value


class CallFrame(NamedTuple):
    caller: str
    callee: str
    input: bytes
    depth: int


class TxStatus(str, Enum):
    SUCCEEDED = "ok"
    FAILED = "fail"


@dataclass(slots=True)
class TxRecord:
    tx_hash: str
    block_number: int
    tx_index: int
    sender_nonce: int
    status: TxStatus
    frames: tuple

    @property
    def key(self) -> tuple:
        return (self.block_number, self.tx_index)

    @property
    def succeeded(self) -> bool:
        return self.status is TxStatus.SUCCEEDED


_STATUS = {"ok": TxStatus.SUCCEEDED, "fail": TxStatus.FAILED}


def _uint(obj, name, lineno):
    v = obj.get(name)
    if type(v) is not int or v < 0:
        raise MalformedRecord(f"field {name!r} must be a non-negative integer", lineno)
    return v


# addresses already validated; real corpora reuse a small working set heavily
_KNOWN_ADDRESSES = set()
_KNOWN_LIMIT = 1 << 20


def _valid_address(value) -> bool:
    if value in _KNOWN_ADDRESSES:
        return True
    if type(value) is not str or _ADDRESS_RE.match(value) is None:
        return False
    if len(_KNOWN_ADDRESSES) >= _KNOWN_LIMIT:
        _KNOWN_ADDRESSES.clear()
    _KNOWN_ADDRESSES.add(value)
    return True


def _load_json(line, lineno):
    try:
        return orjson.loads(line)
    except orjson.JSONDecodeError:
        try:
            # orjson rejects integers wider than 64 bits; let the stdlib parser have a go
            return json.loads(line)
        except (ValueError, UnicodeDecodeError) as exc:
            raise MalformedRecord(f"invalid JSON: {exc}", lineno) from None


def _parse_frame(f, lineno) -> CallFrame:
    if not isinstance(f, dict) or not {"caller", "callee", "input", "depth"} <= f.keys():
        raise MalformedRecord("frame missing caller/callee/input/depth", lineno)
    if not (_valid_address(f["caller"]) and _valid_address(f["callee"])):
        raise MalformedRecord("frame address must be 0x + 40 lowercase hex digits", lineno)
    depth = f["depth"]
    if type(depth) is not int or depth < 0:
        raise MalformedRecord("frame depth must be a non-negative integer", lineno)
    data = f["input"]
    if type(data) is not str or data[:2] != "0x":
        raise MalformedRecord("frame input must be 0x-prefixed hex", lineno)
    try:
        payload = bytes.fromhex(data[2:])
    except ValueError:
        payload = None
    # fromhex tolerates embedded whitespace; the length check rules it out
    if payload is None or 2 * len(payload) != len(data) - 2:
        raise MalformedRecord("frame input is not a whole number of hex bytes", lineno)
    return CallFrame(f["caller"], f["callee"], payload, depth)


def _parse_checked(obj, lineno) -> TxRecord:
    # field-by-field validation with precise messages
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not a JSON object", lineno)
    tx_hash = obj.get("tx_hash")
    if not isinstance(tx_hash, str) or not _HASH_RE.match(tx_hash):
        raise MalformedRecord("tx_hash must be 0x + 64 lowercase hex digits", lineno)
    block = _uint(obj, "block", lineno)
    index = _uint(obj, "index", lineno)
    nonce = _uint(obj, "nonce", lineno)
    status = _STATUS.get(obj.get("status"))
    if status is None:
        raise MalformedRecord("status must be 'ok' or 'fail'", lineno)
    raw_frames = obj.get("frames")
    if not isinstance(raw_frames, list) or not raw_frames:
        raise MalformedRecord("frames must be a non-empty list", lineno)
    frames = tuple(_parse_frame(f, lineno) for f in raw_frames)
    if frames[0].depth != 0:
        raise MalformedRecord("first frame must be the depth-0 external call", lineno)
    return TxRecord(tx_hash, block, index, nonce, status, frames)


# C-level tuple construction; NamedTuple.__new__ is Python code
_new = tuple.__new__


def parse_record(line, lineno: Optional[int] = None) -> TxRecord:
    """Parse and validate one corpus line (bytes or str)."""
    obj = _load_json(line, lineno)
    # fast path for well-formed lines; anything odd is re-examined by _parse_checked
    try:
        tx_hash = obj["tx_hash"]
        block = obj["block"]
        index = obj["index"]
        nonce = obj["nonce"]
        status = _STATUS[obj["status"]]
        raw_frames = obj["frames"]
        if not (type(block) is int and type(index) is int and type(nonce) is int
                and block >= 0 and index >= 0 and nonce >= 0
                and type(tx_hash) is str and _HASH_RE.match(tx_hash)
                and type(raw_frames) is list and raw_frames):
            return _parse_checked(obj, lineno)
        known = _KNOWN_ADDRESSES
        frames = []
        for f in raw_frames:
            caller = f["caller"]
            callee = f["callee"]
            data = f["input"]
            depth = f["depth"]
            if (caller not in known or callee not in known or type(depth) is not int or depth < 0
                    or type(data) is not str or data[:2] != "0x" or len(data) & 1):
                return _parse_checked(obj, lineno)
            payload = bytes.fromhex(data[2:])
            if 2 * len(payload) != len(data) - 2:
                return _parse_checked(obj, lineno)
            frames.append(_new(CallFrame, (caller, callee, payload, depth)))
    except (KeyError, TypeError, ValueError):
        return _parse_checked(obj, lineno)
    if frames[0].depth != 0:
        raise MalformedRecord("first frame must be the depth-0 external call", lineno)
    return TxRecord(tx_hash, block, index, nonce, status, tuple(frames))


def emit_record(record: TxRecord) -> str:
    """Serialize a record to its canonical wire line (without the newline)."""
    frames = ",".join(
        '{"caller":"%s","callee":"%s","input":"0x%s","depth":%d}'
        % (f.caller, f.callee, f.input.hex(), f.depth)
        for f in record.frames
    )
    return '{"tx_hash":"%s","block":%d,"index":%d,"nonce":%d,"status":"%s","frames":[%s]}' % (
        record.tx_hash,
        record.block_number,
        record.tx_index,
        record.sender_nonce,
        record.status.value,
        frames,
    )


def write_corpus(records: Iterable[TxRecord], path: PathLike) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(emit_record(rec))
            fh.write("\n")
            n += 1
    return n


# -- streaming -------------------------------------------------------------

def _line_key(line: bytes, lineno: int) -> tuple:
    m = _KEY_RE.search(line)
    if m is not None:
        return (int(m.group(1)), int(m.group(2)))
    # non-canonical key order; fall back to a full parse for the key
    rec = parse_record(line, lineno)
    return (rec.block_number, rec.tx_index)


def _open_source(path):
    try:
        return open(path, "rb")
    except OSError as exc:
        raise SourceUnavailable(f"cannot read corpus {os.fspath(path)!r}: {exc}") from None


def _keyed_lines(path, lo, hi):
    """Yield (key, lineno, line) for in-range, non-blank lines of one file."""
    with _open_source(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            key = _line_key(line, lineno)
            if lo <= key[0] <= hi:
                yield key, lineno, line


_CHUNK = 1 << 24


def _scan_keys(buf, lo, hi, prev):
    """Keys of ``buf`` in range must ascend from ``prev``; returns (ok, last key, keys seen)."""
    keys = [(int(b), int(i)) for b, i in _KEY_RE.findall(buf)]
    n = len(keys)
    if lo > 0 or hi != float("inf"):
        keys = [k for k in keys if lo <= k[0] <= hi]
    if not keys:
        return True, prev, n
    if keys[0] < prev or any(map(tuple.__gt__, keys, keys[1:])):
        return False, prev, n
    return True, keys[-1], n


def _is_sorted(path, lo, hi) -> bool:
    """Check key order with a regex sweep over large chunks of the file."""
    prev = (-1, -1)
    n_keys = n_lines = 0
    tail = b""
    with _open_source(path) as fh:
        while True:
            block = fh.read(_CHUNK)
            if not block:
                break
            cut = block.rfind(b"\n") + 1
            if cut == 0:
                tail += block
                continue
            buf, tail = tail + block[:cut], block[cut:]
            n_lines += buf.count(b"\n")
            ok, prev, n = _scan_keys(buf, lo, hi, prev)
            if not ok:
                return False
            n_keys += n
        if tail:
            n_lines += 1
            ok, prev, n = _scan_keys(tail, lo, hi, prev)
            if not ok:
                return False
            n_keys += n
    if n_keys == n_lines:
        return True
    # blank lines or non-canonical key order: fall back to the per-line scan
    prev = None
    for key, _, _ in _keyed_lines(path, lo, hi):
        if prev is not None and key < prev:
            return False
        prev = key
    return True


def _spill(chunk, tmpdir):
    chunk.sort(key=lambda item: item[0])
    fd, name = tempfile.mkstemp(dir=tmpdir, suffix=".run")
    with os.fdopen(fd, "wb") as out:
        for (b, i), lineno, line in chunk:
            out.write(b"%d %d %d " % (b, i, lineno))
            out.write(line if line.endswith(b"\n") else line + b"\n")
    return name


def _read_run(name):
    with open(name, "rb") as fh:
        for raw in fh:
            b, i, lineno, line = raw.split(b" ", 3)
            yield (int(b), int(i)), int(lineno), line


def _sorted_lines(path, lo, hi, chunk_size, tmpdir):
    """Yield keyed lines of one file in key order, external-sorting if needed."""
    if _is_sorted(path, lo, hi):
        yield from _keyed_lines(path, lo, hi)
    else:
        yield from _external_sort(path, lo, hi, chunk_size, tmpdir)


def _external_sort(path, lo, hi, chunk_size, tmpdir):
    it = _keyed_lines(path, lo, hi)
    first = list(islice(it, chunk_size))
    rest = list(islice(it, 1))
    if not rest:
        first.sort(key=lambda item: item[0])
        yield from first
        return
    with tempfile.TemporaryDirectory(dir=tmpdir) as scratch:
        runs = [_spill(first + rest, scratch)]
        del first, rest
        while True:
            chunk = list(islice(it, chunk_size))
            if not chunk:
                break
            runs.append(_spill(chunk, scratch))
        yield from heapq.merge(*(_read_run(r) for r in runs), key=lambda item: item[0])


def stream_corpus(
    source: Union[PathLike, Sequence[PathLike]],
    block_range: Optional[tuple] = None,
    *,
    chunk_size: int = 200_000,
    tmpdir: Optional[PathLike] = None,
) -> Iterator[TxRecord]:
    """
    Stream records from one or more corpus files in ascending
    ``(block_number, tx_index)`` order, restricted to ``block_range``
    (inclusive).

    Already-ordered files are streamed directly after a cheap key scan;
    unordered files go through an external merge sort with runs of
    ``chunk_size`` lines, so memory stays bounded by ``chunk_size`` rather
    than the corpus size.
    """
    paths = [source] if isinstance(source, (str, os.PathLike)) else list(source)
    lo, hi = (0, float("inf")) if block_range is None else block_range
    for p in paths:
        if not os.access(p, os.R_OK) or not os.path.isfile(p):
            raise SourceUnavailable(f"cannot read corpus {os.fspath(p)!r}")
    if lo > hi:
        return

    if len(paths) == 1:
        if _is_sorted(paths[0], lo, hi):
            yield from _stream_sorted(paths[0], lo, hi)
            return
        merged = _external_sort(paths[0], lo, hi, chunk_size, tmpdir)
    else:
        streams = [_sorted_lines(p, lo, hi, chunk_size, tmpdir) for p in paths]
        merged = heapq.merge(*streams, key=lambda item: item[0])
    prev = None
    for key, lineno, line in merged:
        if key == prev:
            raise OrderViolation(f"duplicate (block, index) {key} at line {lineno}")
        prev = key
        yield parse_record(line, lineno)


def _stream_sorted(path, lo, hi):
    # keys come from the parsed record; no second regex pass
    prev = None
    with _open_source(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if len(line) < 3 and not line.strip():
                continue
            rec = parse_record(line, lineno)
            if not lo <= rec.block_number <= hi:
                continue
            key = (rec.block_number, rec.tx_index)
            if prev is not None and key <= prev:
                if key == prev:
                    raise OrderViolation(f"duplicate (block, index) {key} at line {lineno}")
                # the key pre-scan was fooled (e.g. by an extra field); never yield out of order
                raise OrderViolation(f"record {key} at line {lineno} precedes {prev}")
            prev = key
            yield rec


# -- token registry --------------------------------------------------------

class TokenStandard(str, Enum):
    ERC20 = "erc20"
    ERC721 = "erc721"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class TokenMeta:
    standard: TokenStandard = TokenStandard.UNKNOWN
    total_supply: Optional[int] = None
    decimals: Optional[int] = None


UNKNOWN_TOKEN = TokenMeta()


class TokenRegistry:
    """Token metadata keyed by address; unregistered addresses are ``unknown``."""

    def __init__(self, entries=None):
        self._entries = {}
        for address, meta in (entries or {}).items():
            self.add(address, meta)

    def add(self, address, meta: TokenMeta):
        address = to_address(address)
        if address in self._entries:
            raise DuplicateToken(f"token {address} registered twice")
        self._entries[address] = meta

    def lookup(self, address) -> TokenMeta:
        return self._entries.get(address, UNKNOWN_TOKEN)

    def __contains__(self, address):
        return address in self._entries

    def __len__(self):
        return len(self._entries)

    def items(self):
        return sorted(self._entries.items())

    def erc721_addresses(self) -> frozenset:
        return frozenset(a for a, m in self._entries.items() if m.standard is TokenStandard.ERC721)


def _registry_entry(obj, lineno):
    if not isinstance(obj, dict):
        raise MalformedRegistry(f"line {lineno}: entry is not a JSON object")
    try:
        address = to_address(obj["address"])
        standard = TokenStandard(obj.get("standard", "unknown"))
    except (KeyError, ValueError, TypeError) as exc:
        raise MalformedRegistry(f"line {lineno}: {exc}") from None
    supply = obj.get("total_supply")
    if supply is not None:
        if not isinstance(supply, str) or not supply.isdigit():
            raise MalformedRegistry(f"line {lineno}: total_supply must be a decimal string")
        supply = int(supply)
        if supply > MAX_UINT256:
            raise MalformedRegistry(f"line {lineno}: total_supply exceeds uint256")
    decimals = obj.get("decimals")
    if decimals is not None and (type(decimals) is not int or not 0 <= decimals <= 77):
        raise MalformedRegistry(f"line {lineno}: decimals must be an integer in [0, 77]")
    return address, TokenMeta(standard, supply, decimals)


def load_registry(path: PathLike) -> TokenRegistry:
    registry = TokenRegistry()
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise SourceUnavailable(f"cannot read registry {os.fspath(path)!r}: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except ValueError as exc:
                raise MalformedRegistry(f"line {lineno}: invalid JSON: {exc}") from None
            address, meta = _registry_entry(obj, lineno)
            if address in registry:
                raise DuplicateToken(f"line {lineno}: token {address} registered twice")
            registry.add(address, meta)
    return registry


def write_registry(registry: TokenRegistry, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for address, meta in registry.items():
            fh.write(json.dumps({
                "address": address,
                "standard": meta.standard.value,
                "total_supply": None if meta.total_supply is None else str(meta.total_supply),
                "decimals": meta.decimals,
            }, separators=(",", ":")))
            fh.write("\n")
