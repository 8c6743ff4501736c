"""
Finding approvals in raw transaction traces.

We generate a small labelled corpus, decode it, and look at what the decoder
kept and what it threw away.
"""
import tempfile
from pathlib import Path

from approval_lens.decode import APPROVE, TRANSFER, TRANSFER_FROM, Decoder
from approval_lens.ingest import load_registry, stream_corpus
from approval_lens.report import render_csv, summarize_approvals
from approval_lens.synth import GenSpec, generate_corpus

work = Path(tempfile.mkdtemp(prefix="detect-"))
spec = GenSpec(seed=1, n_txs=3000, n_blocks=80)
truth = generate_corpus(spec, work / "corpus.jsonl", work / "truth.json", work / "registry.jsonl")

# The three selectors everything hinges on.
print("approve      ", APPROVE.hex())
print("transferFrom ", TRANSFER_FROM.hex())
print("transfer     ", TRANSFER.hex())

registry = load_registry(work / "registry.jsonl")
decoder = Decoder(registry)
events = [ev for rec in stream_corpus(work / "corpus.jsonl") for ev in decoder.decode(rec)]
print(f"\n{len(events)} events decoded, ground truth has {len(truth['events'])}")

# Approvals on an NFT contract and approve() calls made from inside another
# contract look identical at the byte level; both are dropped and counted.
print(decoder.stats)

# The kind split: unlimited, zero and everything else.
print()
print(render_csv(summarize_approvals(events).to_table()))
