"""
Drain drill: what the risk numbers promise, an attack delivers.

A malicious (or exploited) spender pulls everything it can from 100 victims.
The amounts taken match the amount-at-stake figures from the block before,
and unlimited approvals stay dangerous afterwards (allowance left, no balance).
"""
import csv
import tempfile
from pathlib import Path

from approval_lens.report import RunConfig, run_pipeline
from approval_lens.synth import scenario_attack

work = Path(tempfile.mkdtemp(prefix="attack-"))
truth = scenario_attack("model2", 100, 7, work / "corpus.jsonl", work / "truth.json", work / "registry.jsonl")
atk = truth["attack"]

cfg = RunConfig.from_mapping({"corpus": str(work / "corpus.jsonl"), "registry": str(work / "registry.jsonl"),
                              "out": str(work / "out"), "checkpoints": "3,4"})
print("\n".join(run_pipeline(cfg).lines))

rows = [r for r in csv.DictReader(open(work / "out" / "risk.csv")) if r["spender"] == atk["spender"]]
before = {r["owner"]: int(r["risk_amount"]) for r in rows if r["block"] == "3"}
after = {r["owner"]: r["risk_level"] for r in rows if r["block"] == "4"}

print("\nvictim       at stake      stolen   level after")
for v in atk["victims"][:8]:
    print(f"{v['victim'][:10]}  {before[v['victim']]:>10}  {int(v['stolen']):>10}   {after[v['victim']]}")
print("total stolen", atk["total_stolen"], "== sum at stake", sum(before.values()))
