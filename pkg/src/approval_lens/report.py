"""
Summary tables, report emission and the end-to-end pipeline.

Every report is a :class:`Table` (or something convertible to one) so CSV
and JSON renderings share field order. Amounts are always written as decimal
strings; percentages as one-decimal numbers rounded half up.
"""
from __future__ import annotations

import csv
import io
import json
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Optional

from .behavior import FIVE_MODES, Mode, behavior_distribution, extract_sequences
from .decode import ApprovalEvent, ApprovalKind, UaConfig, UaMode, event_to_json
from .errors import ConfigError
from .ingest import load_registry, stream_corpus, to_address
from .ledger import LedgerConfig, OnInsufficient, replay
from .risk import build_risk_snapshot, percent, risk_distribution, risk_series

KINDS = (ApprovalKind.UA, ApprovalKind.ZA, ApprovalKind.OA)


@dataclass
class Table:
    """Named rows with a fixed field order; amount cells are decimal strings."""

    name: str
    fields: list
    rows: list = field(default_factory=list)

    def to_table(self):
        return self

    def to_json(self):
        return {"table": self.name, "fields": list(self.fields), "rows": [_jsonify(r) for r in self.rows]}


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Decimal):
        return f"{v:.1f}"
    if hasattr(v, "value") and isinstance(v.value, str):
        return v.value
    return v


def _jsonify(row):
    out = {}
    for k, v in row.items():
        if v is None or isinstance(v, int):
            out[k] = v
        elif isinstance(v, Decimal):
            out[k] = float(f"{v:.1f}")
        else:
            out[k] = _cell(v)
    return out


# -- approval summary --------------------------------------------------------

@dataclass
class KindStats:
    transactions: int = 0
    senders: int = 0
    spenders: int = 0
    tokens: int = 0


@dataclass
class ApprovalSummary:
    per_kind: dict
    total_transactions: int
    unique_senders: int
    unique_spenders: int
    unique_tokens: int

    def pct_transactions(self, kind):
        return percent(self.per_kind[kind].transactions, self.total_transactions)

    def to_table(self) -> Table:
        rows = []
        for kind in KINDS:
            k = self.per_kind[kind]
            rows.append({
                "kind": kind.value,
                "transactions": k.transactions,
                "pct_transactions": percent(k.transactions, self.total_transactions),
                "senders": k.senders,
                "pct_senders": percent(k.senders, self.unique_senders),
                "spenders": k.spenders,
                "pct_spenders": percent(k.spenders, self.unique_spenders),
                "tokens": k.tokens,
                "pct_tokens": percent(k.tokens, self.unique_tokens),
            })
        rows.append({
            "kind": "total",
            "transactions": self.total_transactions,
            "pct_transactions": percent(self.total_transactions, self.total_transactions),
            "senders": self.unique_senders,
            "pct_senders": percent(self.unique_senders, self.unique_senders),
            "spenders": self.unique_spenders,
            "pct_spenders": percent(self.unique_spenders, self.unique_spenders),
            "tokens": self.unique_tokens,
            "pct_tokens": percent(self.unique_tokens, self.unique_tokens),
        })
        return Table("approval_summary", list(rows[0]), rows)

    def to_json(self):
        return {
            "total": {
                "transactions": self.total_transactions,
                "senders": self.unique_senders,
                "spenders": self.unique_spenders,
                "tokens": self.unique_tokens,
            },
            "kinds": {
                kind.value: {
                    "transactions": k.transactions,
                    "pct_transactions": float(percent(k.transactions, self.total_transactions)),
                    "senders": k.senders,
                    "pct_senders": float(percent(k.senders, self.unique_senders)),
                    "spenders": k.spenders,
                    "pct_spenders": float(percent(k.spenders, self.unique_spenders)),
                    "tokens": k.tokens,
                    "pct_tokens": float(percent(k.tokens, self.unique_tokens)),
                }
                for kind, k in self.per_kind.items()
            },
        }

    @classmethod
    def from_json(cls, obj) -> "ApprovalSummary":
        per_kind = {
            ApprovalKind(name): KindStats(v["transactions"], v["senders"], v["spenders"], v["tokens"])
            for name, v in obj["kinds"].items()
        }
        t = obj["total"]
        return cls(per_kind, t["transactions"], t["senders"], t["spenders"], t["tokens"])


class ApprovalSummarizer:
    """Streaming accumulator behind :func:`summarize_approvals`."""

    def __init__(self):
        self.count = {k: 0 for k in KINDS}
        self.senders = {k: set() for k in KINDS}
        self.spenders = {k: set() for k in KINDS}
        self.tokens = {k: set() for k in KINDS}

    def add(self, ev: ApprovalEvent):
        k = ev.kind
        self.count[k] += 1
        self.senders[k].add(ev.sender)
        self.spenders[k].add(ev.spender)
        self.tokens[k].add(ev.token)

    def result(self) -> ApprovalSummary:
        per_kind = {
            k: KindStats(self.count[k], len(self.senders[k]), len(self.spenders[k]), len(self.tokens[k]))
            for k in KINDS
        }
        union = lambda d: len(set().union(*d.values()))  # noqa: E731
        return ApprovalSummary(per_kind, sum(self.count.values()),
                               union(self.senders), union(self.spenders), union(self.tokens))


def summarize_approvals(events: Iterable) -> ApprovalSummary:
    acc = ApprovalSummarizer()
    for ev in events:
        if type(ev) is ApprovalEvent:
            acc.add(ev)
    return acc.result()


# -- emission ----------------------------------------------------------------

def render_csv(table: Table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.fields)
    for row in table.rows:
        writer.writerow([_cell(row[f]) for f in table.fields])
    return buf.getvalue()


def render_json(obj) -> str:
    return json.dumps(obj.to_json(), indent=2, ensure_ascii=False) + "\n"


def emit(report, fmt: str, path) -> Path:
    """Write ``report`` as ``csv`` or ``json`` to ``path`` (UTF-8, trailing newline)."""
    path = Path(path)
    if fmt == "csv":
        text = render_csv(report.to_table())
    elif fmt == "json":
        text = render_json(report)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


# -- report tables -------------------------------------------------------------

def risk_table(risk_snapshots) -> Table:
    rows = [
        {"block": s.block, "token": t.token, "owner": t.owner, "spender": t.spender,
         "risk_amount": str(t.risk_amount), "risk_level": t.risk_level}
        for s in risk_snapshots for t in s.tuples
    ]
    return Table("risk", ["block", "token", "owner", "spender", "risk_amount", "risk_level"], rows)


def risk_distribution_table(snapshot) -> Table:
    rows = []
    for token in sorted(snapshot.tokens):
        d = risk_distribution(snapshot, token)
        rows.append({"token": token, "users": d.users, "pct_no": d.pct_no,
                     "pct_low": d.pct_low, "pct_high": d.pct_high})
    return Table("risk_distribution", ["token", "users", "pct_no", "pct_low", "pct_high"], rows)


def risk_series_table(risk_snapshots) -> Table:
    tokens = sorted(set().union(*(s.tokens for s in risk_snapshots))) if risk_snapshots else []
    rows = []
    for token in tokens:
        for agg in ("sum_risk_amount", "level_counts"):
            for r in risk_series(risk_snapshots, token, agg):
                rows.append({"block": r.block, "token": r.token, "metric": r.metric, "value": str(r.value)})
    rows.sort(key=lambda r: (r["block"], r["token"]))
    return Table("risk_series", ["block", "token", "metric", "value"], rows)


def behavior_table(sequences) -> Table:
    rows = [
        {"owner": s.owner, "spender": s.spender, "token": s.token, "n_events": len(s.events),
         "mode": s.mode, "good_practice": s.good_practice,
         "first_block": s.events[0].block_number, "last_block": s.events[-1].block_number}
        for s in sequences
    ]
    return Table("behavior", ["owner", "spender", "token", "n_events", "mode", "good_practice",
                              "first_block", "last_block"], rows)


def behavior_distribution_tables(dist):
    rows = [
        {"spender": r.spender, "token": r.token, "identical_users": r.identical_users,
         **{f"pct_{m.value.lower()}": r.pct(m) for m in FIVE_MODES}, "n_anomalous": r.n_anomalous}
        for r in dist.rows
    ]
    per_pair = Table("behavior_distribution",
                     ["spender", "token", "identical_users", "pct_m1", "pct_m2", "pct_m3", "pct_m4",
                      "pct_m5", "n_anomalous"], rows)
    mode_rows = [{"mode": m.value, "count": dist.totals[m], "pct": dist.pct(m)} for m in FIVE_MODES]
    mode_rows.append({"mode": Mode.ANOMALOUS.value, "count": dist.n_anomalous, "pct": None})
    modes = Table("behavior_modes", ["mode", "count", "pct"], mode_rows)
    return per_pair, modes


# -- configuration -------------------------------------------------------------

ENV_CONFIG = "APPROVAL_LENS_CONFIG"

_DEFAULTS = {
    "corpus": None,
    "registry": None,
    "from_block": None,
    "to_block": None,
    "checkpoints": None,
    "ua_mode": "strict",
    "ua_threshold": str(1 << 248),
    "pairs": None,
    "out": "out",
    "format": "csv",
    "infinite_no_decrement": False,
    "on_insufficient": "skip",
    "include_failed": False,
}


@dataclass
class RunConfig:
    corpus: list
    registry: str
    out: str
    from_block: Optional[int] = None
    to_block: Optional[int] = None
    checkpoints: list = field(default_factory=list)
    ua: UaConfig = field(default_factory=UaConfig)
    ledger: LedgerConfig = field(default_factory=LedgerConfig)
    pairs: Optional[list] = None
    formats: tuple = ("csv",)
    include_failed: bool = False

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        """Build and validate a config from flat key/value settings."""
        v = dict(_DEFAULTS)
        v.update({k: x for k, x in values.items() if x is not None})
        unknown = set(values) - set(_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")

        corpus = v["corpus"]
        if isinstance(corpus, (str, os.PathLike)):
            corpus = [corpus]
        if not corpus:
            raise ConfigError("no corpus given (--corpus)")
        for p in corpus:
            if not os.path.isfile(p):
                raise ConfigError(f"corpus file not found: {p}")
        if not v["registry"]:
            raise ConfigError("no token registry given (--registry)")
        if not os.path.isfile(v["registry"]):
            raise ConfigError(f"registry file not found: {v['registry']}")

        try:
            lo = None if v["from_block"] is None else int(v["from_block"])
            hi = None if v["to_block"] is None else int(v["to_block"])
            cps = v["checkpoints"] or []
            if isinstance(cps, str):
                cps = [c for c in cps.split(",") if c.strip()]
            cps = sorted(int(c) for c in cps)
            ua = UaConfig(UaMode(v["ua_mode"]), int(v["ua_threshold"]))
            ledger = LedgerConfig(bool(v["infinite_no_decrement"]), OnInsufficient.parse(v["on_insufficient"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if (lo is not None and lo < 0) or (hi is not None and hi < 0):
            raise ConfigError("block numbers must be non-negative")
        if any(c < 0 for c in cps):
            raise ConfigError("checkpoints must be non-negative")

        fmts = v["format"]
        if isinstance(fmts, str):
            fmts = [f.strip() for f in fmts.split(",") if f.strip()]
        if not fmts or any(f not in ("csv", "json") for f in fmts):
            raise ConfigError(f"format must be csv and/or json, got {v['format']!r}")

        pairs = None
        if v["pairs"]:
            pairs = load_pairs(v["pairs"])
        return cls([str(p) for p in corpus], str(v["registry"]), str(v["out"]), lo, hi, cps, ua, ledger,
                   pairs, tuple(dict.fromkeys(fmts)), bool(v["include_failed"]))

    @property
    def block_range(self):
        if self.from_block is None and self.to_block is None:
            return None
        return (self.from_block or 0, float("inf") if self.to_block is None else self.to_block)


def load_pairs(path) -> list:
    """Read ``spender,token`` rows (header optional) into a list of pairs."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ConfigError(f"cannot read pairs file {path}: {exc}") from None
    if rows and [c.strip().lower() for c in rows[0]] == ["spender", "token"]:
        rows = rows[1:]
    try:
        return [(to_address(r[0].strip()), to_address(r[1].strip())) for r in rows]
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"bad pairs file {path}: {exc}") from None


def load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError("config file must hold a flat JSON object")
    return obj


# -- pipeline -------------------------------------------------------------------

STAGES = ("scan", "risk", "behavior")


@dataclass
class PipelineResult:
    files: list
    summary: ApprovalSummary
    stats: dict
    lines: list


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def run_pipeline(config: RunConfig, stages: Iterable[str] = STAGES) -> PipelineResult:
    """
    ingest -> decode -> replay -> risk -> behavior -> emit.

    All reports are rendered in memory and written to a scratch directory
    that replaces nothing until every stage has succeeded, so a failed run
    leaves no partial report set behind.
    """
    stages = [s for s in STAGES if s in set(stages)]
    registry = load_registry(config.registry)
    records = stream_corpus(config.corpus, config.block_range)
    result = replay(records, registry, config.ua, config.ledger, config.checkpoints,
                    include_failed=config.include_failed)
    events = result.events

    reports = {}
    summary = summarize_approvals(events)
    if "scan" in stages:
        reports["approval_summary"] = summary

    snapshots = list(result.snapshots) or [result.final_snapshot()]
    risk_snaps = [build_risk_snapshot(s) for s in snapshots]
    if "risk" in stages:
        reports["risk"] = risk_table(risk_snaps)
        reports["risk_distribution"] = risk_distribution_table(risk_snaps[-1])
        reports["risk_series"] = risk_series_table(risk_snaps)

    n_seq = n_good = 0
    if "behavior" in stages:
        seqs = [s.classify() for s in extract_sequences(events, config.pairs)]
        n_seq, n_good = len(seqs), sum(1 for s in seqs if s.good_practice)
        dist = behavior_distribution(seqs, config.pairs)
        reports["behavior"] = behavior_table(seqs)
        reports["behavior_distribution"], reports["behavior_modes"] = behavior_distribution_tables(dist)

    stats = {
        "records": result.decode_stats.records,
        "decode": result.decode_stats.as_dict(),
        "ledger": result.ledger.stats.as_dict(),
        "last_block": result.final_block,
        "checkpoints": [s.block for s in snapshots],
    }

    out = Path(config.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".approval-lens-", dir=out.parent))
    try:
        for name, report in reports.items():
            for fmt in config.formats:
                emit(report, fmt, scratch / f"{name}.{fmt}")
        if "scan" in stages:
            _write_text(scratch / "events.jsonl", "".join(event_to_json(e) + "\n" for e in events))
        if "risk" in stages:
            lines = [line for s in snapshots for line in s.dump_lines()]
            _write_text(scratch / "snapshots.jsonl", "".join(line + "\n" for line in lines))
        _write_text(scratch / "stats.json", json.dumps(stats, indent=2, sort_keys=True) + "\n")
        out.mkdir(parents=True, exist_ok=True)
        files = []
        for f in sorted(scratch.iterdir()):
            dest = out / f.name
            os.replace(f, dest)
            files.append(dest)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)

    lines = [
        f"records        {stats['records']} (last block {stats['last_block']})",
        f"approvals      {summary.total_transactions}  "
        + "  ".join(f"{k.value} {summary.per_kind[k].transactions} ({summary.pct_transactions(k)}%)" for k in KINDS),
        f"unique         senders {summary.unique_senders}  spenders {summary.unique_spenders}  "
        f"tokens {summary.unique_tokens}",
        f"executions     {result.decode_stats.executions}  transfers {result.decode_stats.transfers}",
        f"skipped        failed {result.decode_stats.skipped_failed}  erc721 {result.decode_stats.erc721_approvals}"
        f"  internal-approve {result.decode_stats.internal_approvals}"
        f"  malformed {result.decode_stats.malformed_calldata}",
        f"inconsistent   {result.ledger.stats.inconsistent}  clamped {result.ledger.stats.clamped}",
    ]
    if "risk" in stages:
        last = risk_snaps[-1]
        lvl = {}
        for t in last.tuples:
            lvl[t.risk_level.value] = lvl.get(t.risk_level.value, 0) + 1
        lines.append(f"risk @{last.block}  tuples {len(last.tuples)}  "
                     + "  ".join(f"{k} {lvl.get(k, 0)}" for k in ("NoRisk", "LowRisk", "HighRisk")))
    if "behavior" in stages:
        lines.append(f"behaviors      {n_seq} sequences, {n_good} good practice")
    lines.append(f"output         {out} ({len(files)} files)")
    return PipelineResult(files, summary, stats, lines)
