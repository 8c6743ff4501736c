"""
Build a corpus from an Ethereum node over JSON-RPC.

Per batch of blocks we send one JSON-RPC batch with
``eth_getBlockByNumber(n, true)`` and ``debug_traceBlockByNumber(n,
{"tracer": "callTracer"})`` for every block, flatten each call tree
depth-first into frames, and append the records to the corpus.

Resumption: after every completed batch a checkpoint file records the last
completed block and the corpus byte length at that point. A restarted fetch
truncates the corpus back to that length (dropping any half-written batch)
and continues with the next block, so an interrupted-then-resumed fetch
produces the same bytes as an uninterrupted one.
"""
from __future__ import annotations

import json
import logging
import os
import time
from pathlib import Path
from typing import Optional

import requests

from .errors import NetworkError, TraceUnsupported
from .ingest import ZERO_ADDRESS, CallFrame, TxRecord, TxStatus, emit_record, to_address

log = logging.getLogger(__name__)

_METHOD_NOT_FOUND = -32601


class RpcClient:
    def __init__(self, endpoint: str, *, timeout=30.0, max_retries=5, backoff=0.5, max_backoff=8.0,
                 session: Optional[requests.Session] = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.max_backoff = max_backoff
        self.session = session or requests.Session()

    def batch(self, calls):
        """Send ``[(method, params), ...]`` as one batch; return results in call order."""
        payload = [{"jsonrpc": "2.0", "id": i, "method": m, "params": p} for i, (m, p) in enumerate(calls)]
        delay = self.backoff
        for attempt in range(self.max_retries + 1):
            try:
                resp = self.session.post(self.endpoint, json=payload, timeout=self.timeout)
                if resp.status_code >= 500 or resp.status_code == 429:
                    raise NetworkError(f"HTTP {resp.status_code} from {self.endpoint}")
                resp.raise_for_status()
                body = resp.json()
                break
            except (requests.RequestException, NetworkError, ValueError) as exc:
                if attempt == self.max_retries:
                    raise NetworkError(f"giving up on {self.endpoint} after {attempt + 1} attempts: {exc}") from None
                log.warning("rpc attempt %d failed (%s); retrying in %.1fs", attempt + 1, exc, delay)
                time.sleep(delay)
                delay = min(delay * 2, self.max_backoff)
        if isinstance(body, dict):
            # some nodes answer a whole failed batch with a single error object
            body = [body]
        by_id = {item.get("id"): item for item in body}
        results = []
        for i, (method, _) in enumerate(calls):
            item = by_id.get(i)
            if item is None:
                err = body[0].get("error") if body else None
                self._raise(method, err or {"message": "missing response"})
            if item.get("error"):
                self._raise(method, item["error"])
            results.append(item.get("result"))
        return results

    @staticmethod
    def _raise(method, err):
        code = err.get("code")
        msg = err.get("message", "")
        if method.startswith("debug_") and (
            code == _METHOD_NOT_FOUND or "not found" in msg.lower() or "not available" in msg.lower()
            or "does not exist" in msg.lower()
        ):
            raise TraceUnsupported(
                f"{method} is not served by this node ({msg}); use an archive node with the debug "
                "namespace enabled (geth --http.api eth,debug) or a provider offering trace support"
            )
        raise NetworkError(f"{method} failed: {code} {msg}")


def _flatten(call, depth, out):
    callee = call.get("to") or ZERO_ADDRESS
    out.append(CallFrame(to_address(call["from"]), to_address(callee),
                         bytes.fromhex((call.get("input") or "0x")[2:]), depth))
    for sub in call.get("calls") or ():
        _flatten(sub, depth + 1, out)


def _records_for_block(block, traces):
    txs = sorted(block.get("transactions") or [], key=lambda t: int(t["transactionIndex"], 16))
    if len(traces) != len(txs):
        raise NetworkError(f"block {block.get('number')}: {len(txs)} transactions but {len(traces)} traces")
    number = int(block["number"], 16)
    out = []
    for tx, trace in zip(txs, traces):
        # geth >= 1.11 wraps each trace as {"txHash": .., "result": ..}
        if "result" in trace and "from" not in trace:
            trace = trace["result"]
        frames = []
        _flatten(trace, 0, frames)
        status = TxStatus.FAILED if trace.get("error") else TxStatus.SUCCEEDED
        out.append(TxRecord(tx["hash"].lower(), number, int(tx["transactionIndex"], 16),
                            int(tx["nonce"], 16), status, tuple(frames)))
    return out


def _read_checkpoint(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        return None


def _write_checkpoint(path, data):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(data, fh)
    os.replace(tmp, path)


def fetch_via_rpc(endpoint, block_range, out_path, *, checkpoint_path=None, batch_size=10,
                  client: Optional[RpcClient] = None, max_blocks: Optional[int] = None) -> Path:
    """
    Fetch blocks ``lo..hi`` (inclusive) into ``out_path``.

    ``max_blocks`` stops after that many blocks, leaving a resumable
    checkpoint (useful for bounded runs and for testing resumption).
    """
    lo, hi = block_range
    out_path = Path(out_path)
    checkpoint_path = Path(checkpoint_path) if checkpoint_path else out_path.with_suffix(out_path.suffix + ".ckpt")
    client = client or RpcClient(endpoint)

    ckpt = _read_checkpoint(checkpoint_path)
    if ckpt and ckpt.get("range") == [lo, hi] and out_path.exists():
        start = ckpt["last_block"] + 1
        with open(out_path, "r+b") as fh:
            fh.truncate(ckpt["offset"])
        log.info("resuming at block %d", start)
    else:
        start = lo
        out_path.write_bytes(b"")
        _write_checkpoint(checkpoint_path, {"range": [lo, hi], "last_block": lo - 1, "offset": 0})

    done = 0
    with open(out_path, "ab") as fh:
        block = start
        while block <= hi:
            if max_blocks is not None and done >= max_blocks:
                return out_path
            last = min(hi, block + batch_size - 1)
            if max_blocks is not None:
                last = min(last, block + (max_blocks - done) - 1)
            numbers = list(range(block, last + 1))
            calls = [("eth_getBlockByNumber", [hex(n), True]) for n in numbers]
            calls += [("debug_traceBlockByNumber", [hex(n), {"tracer": "callTracer"}]) for n in numbers]
            results = client.batch(calls)
            blocks, traces = results[: len(numbers)], results[len(numbers):]
            for n, blk, tr in zip(numbers, blocks, traces):
                if blk is None:
                    raise NetworkError(f"node returned no block {n}")
                for rec in _records_for_block(blk, tr or []):
                    fh.write(emit_record(rec).encode("utf-8") + b"\n")
            fh.flush()
            os.fsync(fh.fileno())
            _write_checkpoint(checkpoint_path, {"range": [lo, hi], "last_block": last, "offset": fh.tell()})
            done += len(numbers)
            block = last + 1
    return out_path
