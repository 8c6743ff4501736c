"""
Command-line entry point.

    approval-lens scan|risk|behavior|report  --corpus C.jsonl --registry R.jsonl [...]
    approval-lens synth --out DIR [--seed N ...]
    approval-lens fetch --endpoint URL --from-block N --to-block M --out corpus.jsonl

Settings resolve as: command-line flag > config file (``--config`` or
``$APPROVAL_LENS_CONFIG``) > built-in default. Exit codes: 0 success,
1 runtime failure, 2 configuration error; failures print one JSON object
on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .errors import ApprovalLensError, ConfigError, InfeasibleSpec
from .report import ENV_CONFIG, RunConfig, load_config_file, run_pipeline

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

_PIPELINE_STAGES = {
    "scan": ("scan",),
    "risk": ("risk",),
    "behavior": ("behavior",),
    "report": ("scan", "risk", "behavior"),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _pipeline_args(p):
    p.add_argument("--config", help="flat JSON config file (keys mirror flag names with underscores)")
    p.add_argument("--corpus", nargs="+", metavar="PATH")
    p.add_argument("--registry", metavar="PATH")
    p.add_argument("--from-block", type=int, metavar="N")
    p.add_argument("--to-block", type=int, metavar="N")
    p.add_argument("--checkpoints", metavar="N,N,...")
    p.add_argument("--ua-mode", choices=("strict", "threshold"))
    p.add_argument("--ua-threshold", metavar="DEC")
    p.add_argument("--pairs", metavar="FILE", help="CSV of spender,token pairs to restrict behavior analysis")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--format", metavar="csv|json", help="output format(s), comma separated")
    p.add_argument("--infinite-no-decrement", action="store_true", default=None)
    p.add_argument("--on-insufficient", choices=("skip", "clamp", "halt"))
    p.add_argument("--include-failed", action="store_true", default=None)


def build_parser():
    parser = _Parser(prog="approval-lens", description="ERC20 approval risk and behavior analysis")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (
        ("scan", "decode approvals and summarize them"),
        ("risk", "replay state and report RiskAmount / RiskLevel"),
        ("behavior", "classify per-tuple approval/spend behavior"),
        ("report", "all analyses in one run"),
    ):
        _pipeline_args(sub.add_parser(name, help=help_))

    s = sub.add_parser("synth", help="generate a ground-truth labelled synthetic corpus")
    s.add_argument("--out", required=True, metavar="DIR")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-txs", type=int, default=2000)
    s.add_argument("--n-users", type=int, default=60)
    s.add_argument("--n-spenders", type=int, default=8)
    s.add_argument("--n-tokens", type=int, default=4)
    s.add_argument("--n-blocks", type=int, default=200)
    s.add_argument("--quotas", metavar="JSON", help='mode quotas, e.g. \'{"M1": [5, 5]}\'')
    s.add_argument("--weights", metavar="JSON", help="event mix weights")
    s.add_argument("--attack", choices=("model1", "model2"), help="write an attack scenario instead")
    s.add_argument("--victims", type=int, default=100)

    f = sub.add_parser("fetch", help="download blocks and call traces from a node")
    f.add_argument("--endpoint", required=True)
    f.add_argument("--from-block", type=int, required=True)
    f.add_argument("--to-block", type=int, required=True)
    f.add_argument("--out", required=True, metavar="PATH")
    f.add_argument("--checkpoint-file", metavar="PATH")
    f.add_argument("--batch-size", type=int, default=10)
    return parser


def _config_from_args(args) -> RunConfig:
    values = {}
    path = args.config or os.environ.get(ENV_CONFIG)
    if path:
        values.update(load_config_file(path))
    for key in ("corpus", "registry", "from_block", "to_block", "checkpoints", "ua_mode", "ua_threshold",
                "pairs", "out", "format", "infinite_no_decrement", "on_insufficient", "include_failed"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    return RunConfig.from_mapping(values)


def _synth(args):
    from .synth import GenSpec, generate_corpus, scenario_attack

    try:
        quotas = json.loads(args.quotas) if args.quotas else {}
        weights = json.loads(args.weights) if args.weights else None
    except ValueError as exc:
        raise ConfigError(f"bad JSON option: {exc}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus, registry, truth = out / "corpus.jsonl", out / "registry.jsonl", out / "truth.json"
    if args.attack:
        if args.victims < 1:
            raise ConfigError("--victims must be at least 1")
        t = scenario_attack(args.attack, args.victims, args.seed, corpus, truth, registry)
        print(f"{args.attack}: {args.victims} victims, {t['attack']['total_stolen']} stolen -> {out}")
        return
    spec = GenSpec(seed=args.seed, n_users=args.n_users, n_spenders=args.n_spenders, n_tokens=args.n_tokens,
                   n_blocks=args.n_blocks, n_txs=args.n_txs, mode_quotas=quotas)
    if weights is not None:
        spec.weights = weights
    t = generate_corpus(spec, corpus, truth, registry)
    print(f"{spec.n_txs} transactions, {len(t['events'])} events, {len(t['behaviors'])} tuples -> {out}")


def _fetch(args):
    from .fetch import fetch_via_rpc

    path = fetch_via_rpc(args.endpoint, (args.from_block, args.to_block), args.out,
                         checkpoint_path=args.checkpoint_file, batch_size=args.batch_size)
    print(f"corpus written to {path}")


def _fail(code, exc):
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in _PIPELINE_STAGES:
            config = _config_from_args(args)
            result = run_pipeline(config, _PIPELINE_STAGES[args.command])
            print("\n".join(result.lines))
        elif args.command == "synth":
            _synth(args)
        elif args.command == "fetch":
            _fetch(args)
    except (ConfigError, InfeasibleSpec) as exc:
        return _fail(EXIT_CONFIG, exc)
    except (ApprovalLensError, OSError) as exc:
        return _fail(EXIT_RUNTIME, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
