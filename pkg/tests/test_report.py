import csv
import io
import json
from decimal import Decimal

import pytest

from approval_lens.decode import ApprovalEvent, ApprovalKind, event_from_json
from approval_lens.errors import ConfigError, MalformedRecord
from approval_lens.ingest import MAX_UINT256
from approval_lens.report import (ApprovalSummary, RunConfig, Table, emit, load_pairs, render_csv,
                                  run_pipeline, summarize_approvals)

H = "0x" + "00" * 32
U = ["0x%040x" % (i + 1) for i in range(6)]


def ev(sender, spender, token, kind, amount):
    return ApprovalEvent(sender, spender, token, amount, ApprovalKind(kind), 1, 0, H)


def test_summary_counts_and_percentages():
    evs = [ev(U[0], U[1], U[4], "UA", MAX_UINT256), ev(U[0], U[1], U[4], "ZA", 0),
           ev(U[2], U[1], U[5], "UA", MAX_UINT256), ev(U[3], U[2], U[5], "OA", 5)]
    s = summarize_approvals(evs)
    ua = s.per_kind[ApprovalKind.UA]
    assert (s.total_transactions, s.unique_senders, s.unique_spenders, s.unique_tokens) == (4, 3, 2, 2)
    assert (ua.transactions, ua.senders, ua.spenders, ua.tokens) == (2, 2, 1, 2)
    assert s.pct_transactions(ApprovalKind.UA) == Decimal("50.0")
    assert ApprovalSummary.from_json(s.to_json()) == s
    rows = list(csv.DictReader(io.StringIO(render_csv(s.to_table()))))
    assert [r["kind"] for r in rows] == ["UA", "ZA", "OA", "total"]
    assert rows[0]["pct_senders"] == "66.7" and rows[-1]["pct_tokens"] == "100.0"


def test_empty_summary():
    s = summarize_approvals([])
    assert s.total_transactions == 0
    assert render_csv(s.to_table()).splitlines()[-1] == "total,0,0.0,0,0.0,0,0.0,0,0.0"


def test_csv_cells(tmp_path):
    t = Table("x", ["a", "b", "c", "d"], [{"a": True, "b": Decimal("1.50"), "c": None, "d": str(MAX_UINT256)}])
    assert render_csv(t) == "a,b,c,d\ntrue,1.5,," + str(MAX_UINT256) + "\n"
    p = emit(t, "json", tmp_path / "x.json")
    assert json.loads(p.read_text())["rows"] == [{"a": True, "b": 1.5, "c": None, "d": str(MAX_UINT256)}]
    with pytest.raises(ValueError):
        emit(t, "xml", tmp_path / "x.xml")


def test_pairs_file(tmp_path):
    p = tmp_path / "pairs.csv"
    p.write_text(f"spender,token\n{U[0]},{U[1]}\n\n{U[2].upper().replace('0X', '0x')},{U[3]}\n")
    assert load_pairs(p) == [(U[0], U[1]), (U[2], U[3])]
    p.write_text("nonsense\n")
    with pytest.raises(ConfigError):
        load_pairs(p)


def test_config_validation(small_corpus):
    d, _ = small_corpus
    base = {"corpus": str(d / "corpus.jsonl"), "registry": str(d / "registry.jsonl"), "out": "o"}
    cfg = RunConfig.from_mapping({**base, "checkpoints": "30,10", "format": "json,csv"})
    assert cfg.checkpoints == [10, 30] and cfg.formats == ("json", "csv") and cfg.block_range is None
    for bad in ({"registry": None}, {"registry": str(d / "missing")}, {"format": "xml"},
                {"ua_mode": "loose"}, {"ua_threshold": "0"}, {"from_block": -1}, {"bogus": 1},
                {"on_insufficient": "ignore"}, {"checkpoints": "a,b"}, {"corpus": []}):
        with pytest.raises(ConfigError):
            RunConfig.from_mapping({**base, **bad})


def test_pipeline_outputs(small_corpus, tmp_path):
    d, truth = small_corpus
    cfg = RunConfig.from_mapping({"corpus": str(d / "corpus.jsonl"), "registry": str(d / "registry.jsonl"),
                                  "out": str(tmp_path / "out"), "format": "csv,json", "checkpoints": "20,40"})
    res = run_pipeline(cfg)
    names = sorted(p.name for p in res.files)
    for stem in ("approval_summary", "risk", "risk_distribution", "risk_series", "behavior",
                 "behavior_distribution", "behavior_modes"):
        assert f"{stem}.csv" in names and f"{stem}.json" in names
    assert {"events.jsonl", "snapshots.jsonl", "stats.json"} <= set(names)
    events = (tmp_path / "out" / "events.jsonl").read_text().splitlines()
    assert len(events) == len(truth["events"])
    assert event_from_json(events[0]).tx_hash == truth["events"][0]["tx"]
    blocks = {json.loads(x)["block"] for x in (tmp_path / "out" / "snapshots.jsonl").read_text().splitlines()}
    assert blocks == {20, 40}
    behavior = list(csv.DictReader(open(tmp_path / "out" / "behavior.csv")))
    assert len(behavior) == len(truth["behaviors"])
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".approval-lens-")]


def test_pipeline_stage_subset(small_corpus, tmp_path):
    d, _ = small_corpus
    cfg = RunConfig.from_mapping({"corpus": str(d / "corpus.jsonl"), "registry": str(d / "registry.jsonl"),
                                  "out": str(tmp_path / "out")})
    res = run_pipeline(cfg, ["risk"])
    assert sorted(p.name for p in res.files) == ["risk.csv", "risk_distribution.csv", "risk_series.csv",
                                                "snapshots.jsonl", "stats.json"]


def test_failed_run_leaves_no_output(tmp_path, small_corpus):
    d, _ = small_corpus
    bad = tmp_path / "bad.jsonl"
    bad.write_text((d / "corpus.jsonl").read_text().splitlines()[0] + "\n{broken\n")
    cfg = RunConfig.from_mapping({"corpus": str(bad), "registry": str(d / "registry.jsonl"),
                                  "out": str(tmp_path / "out")})
    with pytest.raises(MalformedRecord):
        run_pipeline(cfg)
    assert not (tmp_path / "out").exists()
    assert [p.name for p in tmp_path.iterdir()] == ["bad.jsonl"]
