import json

import pytest

from approval_lens.cli import main


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(d), "--seed", "2", "--n-txs", "600", "--n-blocks", "30",
                 "--quotas", '{"M1": [2, 1]}']) == 0
    return d


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_synth_writes_three_files(synth_dir):
    assert sorted(p.name for p in synth_dir.iterdir()) == ["corpus.jsonl", "registry.jsonl", "truth.json"]


@pytest.mark.parametrize("cmd,expect", [
    ("scan", {"approval_summary.csv", "events.jsonl", "stats.json"}),
    ("risk", {"risk.csv", "risk_distribution.csv", "risk_series.csv", "snapshots.jsonl", "stats.json"}),
    ("behavior", {"behavior.csv", "behavior_distribution.csv", "behavior_modes.csv", "stats.json"}),
])
def test_subcommands(capsys, synth_dir, tmp_path, cmd, expect):
    code, out, _ = run(capsys, [cmd, "--corpus", str(synth_dir / "corpus.jsonl"),
                                "--registry", str(synth_dir / "registry.jsonl"), "--out", str(tmp_path / "o")])
    assert code == 0 and "records" in out
    assert {p.name for p in (tmp_path / "o").iterdir()} == expect


def test_flag_overrides_config_file(capsys, synth_dir, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"corpus": [str(synth_dir / "corpus.jsonl")],
                               "registry": str(synth_dir / "registry.jsonl"),
                               "out": str(tmp_path / "from_file"), "format": "json"}))
    monkeypatch.setenv("APPROVAL_LENS_CONFIG", str(cfg))
    code, _, _ = run(capsys, ["scan", "--out", str(tmp_path / "from_flag")])
    assert code == 0
    assert (tmp_path / "from_flag" / "approval_summary.json").exists()
    assert not (tmp_path / "from_file").exists()


@pytest.mark.parametrize("argv", [
    ["report"],
    ["report", "--corpus", "/nonexistent.jsonl", "--registry", "/nonexistent.jsonl"],
    ["risk", "--ua-mode", "sloppy"],
    ["frobnicate"],
    ["synth", "--out", "{tmp}", "--quotas", "{not json"],
    ["synth", "--out", "{tmp}", "--quotas", '{"M3": [1, 0]}'],
])
def test_config_errors_exit_2(capsys, tmp_path, argv):
    code, _, err = run(capsys, [a.replace("{tmp}", str(tmp_path / "s")) for a in argv])
    assert code == 2
    assert json.loads(err.strip().splitlines()[-1])["exit_code"] == 2


def test_missing_registry_exit_2_no_output(capsys, synth_dir, tmp_path):
    code, _, err = run(capsys, ["report", "--corpus", str(synth_dir / "corpus.jsonl"), "--out", str(tmp_path / "o")])
    assert code == 2 and "registry" in json.loads(err)["message"]
    assert not (tmp_path / "o").exists()


def test_runtime_error_exit_1(capsys, synth_dir, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{broken\n")
    code, _, err = run(capsys, ["report", "--corpus", str(bad), "--registry", str(synth_dir / "registry.jsonl"),
                                "--out", str(tmp_path / "o")])
    assert code == 1 and json.loads(err)["error"] == "MalformedRecord"
    assert not (tmp_path / "o").exists()


def test_attack_synth(capsys, tmp_path):
    code, out, _ = run(capsys, ["synth", "--out", str(tmp_path), "--attack", "model2", "--victims", "5"])
    assert code == 0 and "model2" in out
    assert json.loads((tmp_path / "truth.json").read_text())["attack"]["kind"] == "model2"
