"""
How much could a spender take right now?

Replaying a corpus gives every owner's balance and allowance at chosen
blocks. From those we read the amount at stake and a coarse risk level.
"""
import tempfile
from collections import Counter
from pathlib import Path

from approval_lens.ingest import load_registry, stream_corpus
from approval_lens.ledger import replay
from approval_lens.risk import build_risk_snapshot, risk_distribution, risk_series
from approval_lens.synth import GenSpec, generate_corpus

work = Path(tempfile.mkdtemp(prefix="risk-"))
generate_corpus(GenSpec(seed=4, n_txs=4000, n_blocks=120), work / "corpus.jsonl", registry_path=work / "registry.jsonl")

res = replay(stream_corpus(work / "corpus.jsonl"), load_registry(work / "registry.jsonl"),
             checkpoints=[30, 60, 90, 120])
snaps = [build_risk_snapshot(s) for s in res.snapshots]

last = snaps[-1]
print(Counter(t.risk_level.value for t in last.tuples))

# the riskiest tuples at the end
for t in sorted(last.tuples, key=lambda t: -t.risk_amount)[:5]:
    print(t.owner[:10], t.spender[:10], t.token[:10], t.risk_amount, t.risk_level.value)

token = sorted(last.tokens)[0]
d = risk_distribution(last, token)
print(f"\n{token}: {d.users} users  no {d.pct_no}%  low {d.pct_low}%  high {d.pct_high}%")

for row in risk_series(snaps, token):
    print(row.block, row.value)
