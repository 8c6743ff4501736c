"""
Synthetic, ground-truth-labelled transaction corpora.

Everything the analysis stages should recover is recorded *by construction*:
the generator never calls the decoder, ledger or classifier. Amount
bookkeeping is plain arithmetic over feasible-by-construction events, and the
behavior labels of free-form sequences come from a regular-expression labeller
that shares no code with :mod:`approval_lens.behavior`.

Randomness comes from :class:`random.Random` (MT19937) seeded with
``GenSpec.seed``; the seed and the full spec are written into the ground-truth
file so any failure can be regenerated.
"""
from __future__ import annotations

import json
import random
import re
from dataclasses import asdict, dataclass, field
from typing import Optional

from .errors import InfeasibleSpec
from .ingest import CallFrame, TokenMeta, TokenRegistry, TokenStandard, TxRecord, TxStatus, emit_record, write_registry

MAX = (1 << 256) - 1
ZERO = "0x" + "0" * 40

# selectors hard-coded so ground truth does not depend on the selector code under test
_SEL_APPROVE = bytes.fromhex("095ea7b3")
_SEL_TRANSFER_FROM = bytes.fromhex("23b872dd")
_SEL_TRANSFER = bytes.fromhex("a9059cbb")
_SEL_SWAP = bytes.fromhex("38ed1739")
_SEL_MINT_NFT = bytes.fromhex("40c10f19")

MODES = ("M1", "M2", "M3", "M4", "M5")


def _word_addr(addr: str) -> bytes:
    return bytes(12) + bytes.fromhex(addr[2:])


def _word(n: int) -> bytes:
    return n.to_bytes(32, "big")


def approve_data(spender, amount):
    return _SEL_APPROVE + _word_addr(spender) + _word(amount)


def transfer_from_data(owner, receiver, amount):
    return _SEL_TRANSFER_FROM + _word_addr(owner) + _word_addr(receiver) + _word(amount)


def transfer_data(receiver, amount):
    return _SEL_TRANSFER + _word_addr(receiver) + _word(amount)


DEFAULT_WEIGHTS = {
    "mint": 0.5,
    "approve_ua": 3.0,
    "approve_za": 0.6,
    "approve_oa": 2.0,
    "exec": 4.0,
    "transfer": 2.0,
}


@dataclass
class GenSpec:
    seed: int = 0
    n_users: int = 60
    n_spenders: int = 8
    n_tokens: int = 4
    n_blocks: int = 200
    # total number of transactions written to the corpus
    n_txs: int = 2000
    weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    # {"M1": [good, bad], ...}
    mode_quotas: dict = field(default_factory=dict)
    # share of n_txs spent on decoys (erc721 approvals, internal approvals,
    # failed transactions, plain calls)
    decoy_rate: float = 0.05
    # share of users holding no tokens at all
    unfunded_rate: float = 0.2
    # share of UA approvals that use the registered total supply instead of 2**256-1
    ua_supply_rate: float = 0.15
    # share of OA approvals with a huge (> 2**248) but not maximal amount
    huge_oa_rate: float = 0.03

    def validate(self):
        for name in ("n_users", "n_spenders", "n_tokens", "n_blocks", "n_txs"):
            if getattr(self, name) < 1:
                raise InfeasibleSpec(f"{name} must be positive")
        if self.n_blocks < 2:
            raise InfeasibleSpec("need at least 2 blocks (block 1 holds initial mints)")
        w = self.weights
        if any(v < 0 for v in w.values()) or not any(w.values()):
            raise InfeasibleSpec("event weights must be non-negative and not all zero")
        unknown = set(w) - set(DEFAULT_WEIGHTS)
        if unknown:
            raise InfeasibleSpec(f"unknown weight keys {sorted(unknown)}")
        for mode, q in self.mode_quotas.items():
            if mode not in MODES:
                raise InfeasibleSpec(f"unknown mode {mode!r} in quotas")
            good, bad = q
            if good < 0 or bad < 0:
                raise InfeasibleSpec("quotas must be non-negative")
            if mode in ("M3", "M4") and good:
                raise InfeasibleSpec(f"{mode} has no good-practice form")


# -- independent sequence labeller ---------------------------------------

_MODE_PATTERNS = (
    ("Anomalous", re.compile(r"E.*")),
    ("M1", re.compile(r"AE")),
    ("M2", re.compile(r"AEE+")),
    ("M3", re.compile(r"A+")),
    ("M4", re.compile(r"AA+E")),
)
_GOOD_TILING = re.compile(r"(?:UE+Z|OE+)+")
_GOOD_BLOCK = re.compile(r"UE+Z|OE+")


def label_sequence(seq):
    """
    ``seq`` is a list of ``("UA"|"ZA"|"OA"|"E", amount)``; returns
    ``(mode, good_practice)``.
    """
    shape = "".join("E" if k == "E" else "A" for k, _ in seq)
    mode = "M5"
    for name, pat in _MODE_PATTERNS:
        if pat.fullmatch(shape):
            mode = name
            break
    if mode in ("M3", "M4", "Anomalous"):
        return mode, False
    letters = "".join({"UA": "U", "ZA": "Z", "OA": "O", "E": "E"}[k] for k, _ in seq)
    if not _GOOD_TILING.fullmatch(letters):
        return mode, False
    # every block that starts with O must be spent exactly
    for m in _GOOD_BLOCK.finditer(letters):
        if letters[m.start()] == "O":
            approved = seq[m.start()][1]
            spent = sum(a for _, a in seq[m.start() + 1:m.end()])
            if approved != spent:
                return mode, False
    return mode, True


# -- generator ------------------------------------------------------------

class _Tx:
    __slots__ = ("frames", "status", "sender", "events", "tx_hash")

    def __init__(self, frames, sender, status=TxStatus.SUCCEEDED, events=()):
        self.frames = frames
        self.sender = sender
        self.status = status
        self.events = list(events)
        self.tx_hash = None


class _World:
    """Addresses, registry and the arithmetic model of balances/allowances."""

    def __init__(self, rng: random.Random, spec: GenSpec):
        self.rng = rng
        addr = lambda: "0x" + rng.randbytes(20).hex()  # noqa: E731
        self.users = [addr() for _ in range(spec.n_users)]
        n_unfunded = int(round(spec.n_users * spec.unfunded_rate))
        self.funded = self.users[n_unfunded:]
        self.unfunded = self.users[:n_unfunded]
        # first third of spenders are EOAs calling transferFrom directly
        self.spenders = [addr() for _ in range(spec.n_spenders)]
        self.eoa_spenders = set(self.spenders[: max(1, spec.n_spenders // 3)])
        self.routers = [addr() for _ in range(2)]
        self.relayers = [addr() for _ in range(3)]
        self.receivers = [addr() for _ in range(8)]
        self.tokens = [addr() for _ in range(spec.n_tokens)]
        self.nft = addr()
        self.registry = TokenRegistry()
        self.supply = {}
        for i, t in enumerate(self.tokens):
            if i == len(self.tokens) - 1 and len(self.tokens) > 1:
                # one token left out of the registry: standard unknown, no supply
                self.supply[t] = None
                continue
            s = rng.randrange(10**27, 10**30)
            self.supply[t] = s
            self.registry.add(t, TokenMeta(TokenStandard.ERC20, s, 18))
        self.registry.add(self.nft, TokenMeta(TokenStandard.ERC721, None, 0))
        self.balances = {t: {} for t in self.tokens}
        self.allowances = {t: {} for t in self.tokens}
        self.minted = {t: 0 for t in self.tokens}
        self.burned = {t: 0 for t in self.tokens}

    def credit(self, token, who, amount):
        if who == ZERO:
            self.burned[token] += amount
        elif amount:
            b = self.balances[token]
            b[who] = b.get(who, 0) + amount

    def debit(self, token, who, amount):
        if who == ZERO:
            self.minted[token] += amount
            return
        b = self.balances[token]
        left = b.get(who, 0) - amount
        if left < 0:
            raise AssertionError("generator produced an infeasible debit")
        if left:
            b[who] = left
        else:
            b.pop(who, None)

    def approve(self, token, owner, spender, amount):
        if amount:
            self.allowances[token][(owner, spender)] = amount
        else:
            self.allowances[token].pop((owner, spender), None)

    def spend(self, token, owner, spender, amount):
        a = self.allowances[token]
        left = a.get((owner, spender), 0) - amount
        if left < 0:
            raise AssertionError("generator produced an infeasible transferFrom")
        if left:
            a[(owner, spender)] = left
        else:
            a.pop((owner, spender), None)

    def ua_amount(self, token, use_supply):
        if use_supply and self.supply.get(token):
            return self.supply[token]
        return MAX


class Generator:
    def __init__(self, spec: GenSpec):
        spec.validate()
        self.spec = spec
        self.rng = random.Random(spec.seed)
        self.w = _World(self.rng, spec)
        self.diag = {"erc721_approvals": 0, "internal_approvals": 0, "failed": 0, "plain": 0}
        self.sequences = {}  # (owner, spender, token) -> list of (kind, amount)
        self.labels = {}  # recipe tuples -> (mode, good)
        self.nonces = {}

    # -- transaction builders (each also updates the arithmetic model) --

    def _ev(self, etype, **kw):
        kw["type"] = etype
        return kw

    def tx_mint(self, token, to, amount):
        self.w.debit(token, ZERO, amount)
        self.w.credit(token, to, amount)
        frames = [CallFrame(ZERO, token, transfer_data(to, amount), 0)]
        ev = self._ev("transfer", token=token, **{"from": ZERO, "to": to}, amount=amount, frame=0)
        return _Tx(frames, ZERO, events=[ev])

    def tx_approve(self, token, owner, spender, kind, amount):
        rng = self.rng
        self.w.approve(token, owner, spender, amount)
        data = approve_data(spender, amount)
        if rng.random() < 0.05:
            data += rng.randbytes(32)  # trailing junk is ignored by decoders
        frames = [CallFrame(owner, token, data, 0)]
        ev = self._ev("approve", token=token, **{"from": owner}, spender=spender, amount=amount, kind=kind, frame=0)
        self.sequences.setdefault((owner, spender, token), []).append((kind, amount))
        return _Tx(frames, owner, events=[ev])

    def tx_exec(self, token, owner, spender, amount, receiver=None):
        rng = self.rng
        w = self.w
        receiver = receiver or rng.choice(w.receivers)
        w.spend(token, owner, spender, amount)
        w.debit(token, owner, amount)
        events = []
        if spender in w.eoa_spenders:
            frames = [CallFrame(spender, token, transfer_from_data(owner, receiver, amount), 0)]
            sender = spender
            events.append(self._ev("exec", token=token, owner=owner, spender=spender, receiver=receiver,
                                   amount=amount, frame=0))
            w.credit(token, receiver, amount)
        else:
            sender = owner if rng.random() < 0.7 else rng.choice(w.relayers)
            head = _SEL_SWAP + rng.randbytes(64)
            frames = []
            depth = 0
            if rng.random() < 0.3:
                router = rng.choice(w.routers)
                frames.append(CallFrame(sender, router, head, 0))
                frames.append(CallFrame(router, spender, head, 1))
                depth = 2
            else:
                frames.append(CallFrame(sender, spender, head, 0))
                depth = 1
            forward = rng.random() < 0.3
            pull_to = spender if forward else receiver
            frames.append(CallFrame(spender, token, transfer_from_data(owner, pull_to, amount), depth))
            events.append(self._ev("exec", token=token, owner=owner, spender=spender, receiver=pull_to,
                                   amount=amount, frame=len(frames) - 1))
            w.credit(token, pull_to, amount)
            if forward:
                # DApp forwards what it just pulled in
                w.debit(token, spender, amount)
                w.credit(token, receiver, amount)
                frames.append(CallFrame(spender, token, transfer_data(receiver, amount), depth))
                events.append(self._ev("transfer", token=token, **{"from": spender, "to": receiver},
                                       amount=amount, frame=len(frames) - 1))
        self.sequences.setdefault((owner, spender, token), []).append(("E", amount))
        return _Tx(frames, sender, events=events)

    def tx_transfer(self, token, sender, receiver, amount):
        self.w.debit(token, sender, amount)
        self.w.credit(token, receiver, amount)
        frames = [CallFrame(sender, token, transfer_data(receiver, amount), 0)]
        ev = self._ev("transfer", token=token, **{"from": sender, "to": receiver}, amount=amount, frame=0)
        return _Tx(frames, sender, events=[ev])

    def tx_decoy(self):
        rng = self.rng
        w = self.w
        r = rng.random()
        user = rng.choice(w.users)
        if r < 0.3:
            self.diag["erc721_approvals"] += 1
            frames = [CallFrame(user, w.nft, approve_data(rng.choice(w.spenders), rng.randrange(1, 10**5)), 0)]
            return _Tx(frames, user)
        if r < 0.55:
            self.diag["internal_approvals"] += 1
            wallet = rng.choice(w.routers)
            token = rng.choice(w.tokens)
            frames = [
                CallFrame(user, wallet, _SEL_SWAP + bytes(32), 0),
                CallFrame(wallet, token, approve_data(rng.choice(w.spenders), MAX), 1),
            ]
            return _Tx(frames, user)
        if r < 0.8:
            self.diag["failed"] += 1
            token = rng.choice(w.tokens)
            if rng.random() < 0.5:
                data = approve_data(rng.choice(w.spenders), MAX)
                frames = [CallFrame(user, token, data, 0)]
            else:
                spender = rng.choice(w.spenders)
                frames = [
                    CallFrame(user, spender, _SEL_SWAP, 0),
                    CallFrame(spender, token, transfer_from_data(user, spender, 10**9), 1),
                ]
            return _Tx(frames, user, status=TxStatus.FAILED)
        self.diag["plain"] += 1
        if rng.random() < 0.5:
            frames = [CallFrame(user, rng.choice(w.receivers), b"", 0)]
        else:
            frames = [CallFrame(user, w.nft, _SEL_MINT_NFT + _word_addr(user) + _word(1), 0)]
        return _Tx(frames, user)

    # -- recipe templates --------------------------------------------------

    def _amt(self, hi=10**6):
        return self.rng.randrange(1, hi)

    def _parts(self, n):
        return [self._amt() for _ in range(n)]

    def _ua(self, token):
        return ("UA", self.w.ua_amount(token, self.rng.random() < self.spec.ua_supply_rate))

    def _good_block(self, token):
        rng = self.rng
        k = rng.randint(1, 3)
        parts = self._parts(k)
        if rng.random() < 0.5:
            return [self._ua(token)] + [("E", p) for p in parts] + [("ZA", 0)]
        return [("OA", sum(parts))] + [("E", p) for p in parts]

    def recipe(self, mode, good, token):
        """Template A/E script with amounts for a target mode and verdict."""
        rng = self.rng
        if mode == "M1":
            if good:
                x = self._amt()
                return [("OA", x), ("E", x)]
            if rng.random() < 0.5:
                return [self._ua(token), ("E", self._amt())]
            x = self._amt()
            return [("OA", x + self._amt()), ("E", x)]
        if mode == "M2":
            parts = self._parts(rng.randint(2, 4))
            if good:
                return [("OA", sum(parts))] + [("E", p) for p in parts]
            if rng.random() < 0.5:
                return [self._ua(token)] + [("E", p) for p in parts]
            return [("OA", sum(parts) + self._amt())] + [("E", p) for p in parts]
        if mode == "M3":
            out = []
            for _ in range(rng.randint(1, 3)):
                c = rng.choice(("UA", "ZA", "OA"))
                out.append(self._ua(token) if c == "UA" else ("ZA", 0) if c == "ZA" else ("OA", self._amt()))
            return out
        if mode == "M4":
            out = []
            for _ in range(rng.randint(1, 2)):
                c = rng.choice(("UA", "ZA", "OA"))
                out.append(self._ua(token) if c == "UA" else ("ZA", 0) if c == "ZA" else ("OA", self._amt()))
            y = self._amt()
            out.append(self._ua(token) if rng.random() < 0.5 else ("OA", y + rng.randrange(0, 10)))
            out.append(("E", y))
            return out
        # M5
        if good:
            out = []
            for _ in range(rng.randint(2, 3)):
                out += self._good_block(token)
            return out
        choice = rng.randrange(4)
        if choice == 0:
            x = self._amt()
            return [self._ua(token), ("E", self._amt()), ("OA", x + 5), ("E", x)]
        if choice == 1:
            x = self._amt()
            return [("OA", x), ("E", x), ("ZA", 0)]
        if choice == 2:
            return self._good_block(token) + [self._ua(token), ("E", self._amt())]
        x = self._amt()
        return [("OA", x), ("E", x), ("OA", 2 * x), ("E", x)]

    # -- assembly ----------------------------------------------------------

    def _script_txs(self, owner, spender, token, script):
        """Builders for a tuple script, executed lazily so the model stays in time order."""
        out = []
        for kind, amount in script:
            if kind == "E":
                out.append(lambda a=amount: self.tx_exec(token, owner, spender, a))
            else:
                out.append(lambda k=kind, a=amount: self.tx_approve(token, owner, spender, k, a))
        return out

    def _plan_recipes(self):
        spec, rng, w = self.spec, self.rng, self.w
        plans = []
        used = set()
        wanted = []
        for mode in MODES:
            good, bad = self.spec.mode_quotas.get(mode, (0, 0))
            wanted += [(mode, True)] * good + [(mode, False)] * bad
        for mode, good in wanted:
            for _ in range(200):
                token = rng.choice(w.tokens)
                owners = w.users if mode == "M3" else w.funded
                if not owners:
                    raise InfeasibleSpec("no funded users available for executing recipes")
                key = (rng.choice(owners), rng.choice(w.spenders), token)
                if key not in used:
                    break
            else:
                raise InfeasibleSpec("not enough distinct (user, spender, token) tuples for the quotas")
            used.add(key)
            script = self.recipe(mode, good, token)
            if len(script) > spec.n_blocks - 1:
                raise InfeasibleSpec(f"a {mode} sequence of {len(script)} events needs more than "
                                     f"{spec.n_blocks - 1} blocks")
            blocks = sorted(rng.sample(range(2, spec.n_blocks + 1), len(script)))
            plans.append((key, script, blocks))
            self.labels[key] = (mode, good)
        return plans, used

    def _random_tx(self, reserved):
        rng, w = self.rng, self.w
        kinds = list(self.spec.weights)
        weights = [self.spec.weights[k] for k in kinds]
        for _ in range(20):
            kind = rng.choices(kinds, weights)[0]
            token = rng.choice(w.tokens)
            if kind == "mint":
                return self.tx_mint(token, rng.choice(w.users), rng.randrange(1, 10**9))
            if kind.startswith("approve"):
                owner = rng.choice(w.users)
                key = (owner, rng.choice(w.spenders), token)
                if key in reserved:
                    continue
                if kind == "approve_ua":
                    c, amount = self._ua(token)
                elif kind == "approve_za":
                    c, amount = "ZA", 0
                else:
                    c = "OA"
                    if rng.random() < self.spec.huge_oa_rate:
                        amount = rng.randrange((1 << 248) + 1, MAX)
                    else:
                        amount = rng.randrange(1, 10**7)
                return self.tx_approve(key[2], key[0], key[1], c, amount)
            if kind == "exec":
                picked = self._pick_allowance(token, reserved)
                if picked is None:
                    continue
                owner, spender, allowed = picked
                return self.tx_exec(token, owner, spender, rng.randrange(1, min(allowed, 10**6) + 1))
            if kind == "transfer":
                sender = rng.choice(w.funded) if w.funded else None
                if sender is None:
                    continue
                if rng.random() < 0.05:
                    receiver = ZERO
                else:
                    receiver = rng.choice(w.users + w.receivers)
                if w.balances[token].get(sender, 0) < 10**6:
                    continue
                return self.tx_transfer(token, sender, receiver, rng.randrange(1, 10**6))
        return self.tx_decoy()

    def _pick_allowance(self, token, reserved):
        rng, w = self.rng, self.w
        allowances = w.allowances[token]
        for _ in range(8):
            owner, spender = rng.choice(w.funded), rng.choice(w.spenders)
            a = allowances.get((owner, spender), 0)
            if a and (owner, spender, token) not in reserved:
                return owner, spender, a
        funded = self._funded_set
        live = sorted(
            (pair, a) for pair, a in allowances.items()
            if a and pair[0] in funded and (pair[0], pair[1], token) not in reserved
        )
        if not live:
            return None
        (owner, spender), a = rng.choice(live)
        return owner, spender, a

    def _next_nonce(self, sender):
        n = self.nonces.get(sender, 0)
        self.nonces[sender] = n + 1
        return n

    def run(self, corpus_path, truth_path=None, registry_path=None):
        spec, rng, w = self.spec, self.rng, self.w
        self._funded_set = set(w.funded)
        keep = truth_path is not None
        events = [] if keep else None

        plans, reserved = self._plan_recipes()
        per_block_recipe = {}
        for key, script, blocks in plans:
            for b, build in zip(blocks, self._script_txs(*key, script)):
                per_block_recipe.setdefault(b, []).append(build)

        prefund = [(t, u) for u in w.funded for t in w.tokens]
        n_recipe = sum(len(s) for _, s, _ in plans)
        n_decoy = int(round(spec.n_txs * spec.decoy_rate))
        n_random = spec.n_txs - len(prefund) - n_recipe - n_decoy
        if n_random < 0:
            raise InfeasibleSpec(f"n_txs={spec.n_txs} too small for {len(prefund)} initial mints, "
                                 f"{n_recipe} recipe and {n_decoy} decoy transactions")
        decoy_blocks = [rng.randrange(2, spec.n_blocks + 1) for _ in range(n_decoy)]
        decoys_at = {}
        for b in decoy_blocks:
            decoys_at[b] = decoys_at.get(b, 0) + 1

        n_span = spec.n_blocks - 1
        written = 0
        with open(corpus_path, "w", encoding="utf-8", newline="\n") as out:
            for block in range(1, spec.n_blocks + 1):
                if block == 1:
                    txs = [self.tx_mint(t, u, rng.randrange(10**15, 10**18)) for t, u in prefund]
                else:
                    i = block - 2
                    n_here = (i + 1) * n_random // n_span - i * n_random // n_span
                    # interleave the three sources; random-stream order is preserved
                    labels = (["r"] * n_here + ["p"] * len(per_block_recipe.get(block, ()))
                              + ["d"] * decoys_at.get(block, 0))
                    rng.shuffle(labels)
                    recipe_iter = iter(per_block_recipe.get(block, ()))
                    txs = []
                    for lab in labels:
                        if lab == "r":
                            txs.append(self._random_tx(reserved))
                        elif lab == "p":
                            txs.append(next(recipe_iter)())
                        else:
                            txs.append(self.tx_decoy())
                for index, tx in enumerate(txs):
                    tx_hash = "0x" + rng.randbytes(32).hex()
                    rec = TxRecord(tx_hash, block, index, self._next_nonce(tx.sender), tx.status, tuple(tx.frames))
                    out.write(emit_record(rec))
                    out.write("\n")
                    written += 1
                    if keep:
                        for ev in tx.events:
                            ev.update(block=block, index=index, tx=tx_hash)
                            events.append(ev)

        if registry_path is not None:
            write_registry(w.registry, registry_path)
        truth = self._truth(events) if keep else None
        if keep:
            with open(truth_path, "w", encoding="utf-8") as fh:
                json.dump(truth, fh, sort_keys=False)
                fh.write("\n")
        return truth

    def _truth(self, events):
        w = self.w
        behaviors = []
        for key in sorted(self.sequences):
            seq = self.sequences[key]
            if key in self.labels:
                mode, good = self.labels[key]
                # templates and the regex labeller must agree
                assert label_sequence(seq) == (mode, good), (key, seq, mode, good)
            else:
                mode, good = label_sequence(seq)
            behaviors.append({"owner": key[0], "spender": key[1], "token": key[2],
                              "n_events": len(seq), "mode": mode, "good_practice": good})
        return {
            "seed": self.spec.seed,
            "prng": "MT19937 (random.Random)",
            "spec": asdict(self.spec),
            "events": [_jsonable(e) for e in events],
            "final_state": final_state_json(w.balances, w.allowances),
            "supply_flow": {t: {"minted": str(w.minted[t]), "burned": str(w.burned[t])} for t in w.tokens},
            "behaviors": behaviors,
            "attack": None,
            "diagnostics": dict(self.diag),
        }


def _jsonable(ev):
    out = dict(ev)
    if "amount" in out:
        out["amount"] = str(out["amount"])
    return out


def final_state_json(balances, allowances):
    return {
        t: {
            "balances": {a: str(v) for a, v in sorted(balances[t].items()) if v},
            "allowances": [[o, s, str(v)] for (o, s), v in sorted(allowances[t].items()) if v],
        }
        for t in sorted(balances)
    }


def generate_corpus(spec: GenSpec, corpus_path, truth_path=None, registry_path=None) -> Optional[dict]:
    """
    Write a corpus (and optionally its ground truth and registry) for ``spec``.

    Returns the ground-truth document, or None when ``truth_path`` is None
    (bulk corpora for throughput runs skip event bookkeeping).
    """
    return Generator(spec).run(corpus_path, truth_path, registry_path)


def load_truth(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# -- attack scenarios ------------------------------------------------------

def scenario_attack(kind: str, n_victims: int, seed: int, corpus_path, truth_path=None, registry_path=None,
                    ua_rate: float = 0.5, unfunded_rate: float = 0.1) -> dict:
    """
    Victims are funded (block 1) and approve a spender (block 2); in model2
    some of them also use the honest DApp (block 3). At ``attack_block``
    the attacker drains every victim through the approved spender.

    model1: victims approve a malicious contract; the attacker EOA calls it
    and it pulls the tokens. model2: victims approve an honest but
    exploitable DApp; the attacker triggers the exploit and the DApp itself
    is the transferFrom caller.
    """
    if kind not in ("model1", "model2"):
        raise ValueError("kind must be 'model1' or 'model2'")
    if n_victims < 1:
        raise ValueError("n_victims must be >= 1")
    rng = random.Random(seed)
    addr = lambda: "0x" + rng.randbytes(20).hex()  # noqa: E731
    token = addr()
    supply = 10**30
    registry = TokenRegistry()
    registry.add(token, TokenMeta(TokenStandard.ERC20, supply, 6))
    attacker = addr()
    spender = addr()  # malicious contract (model1) or exploited DApp (model2)
    pool = addr()
    victims = [addr() for _ in range(n_victims)]

    balance, allowance, blocks = {}, {}, {1: [], 2: [], 3: [], 4: []}
    nonces = {}
    victim_info = []
    for v in victims:
        funded = rng.random() >= unfunded_rate
        bal = rng.randrange(1, 10**9) if funded else 0
        balance[v] = bal
        if bal:
            blocks[1].append((ZERO, [CallFrame(ZERO, token, transfer_data(v, bal), 0)]))
        if rng.random() < ua_rate:
            akind, amt = "UA", (supply if rng.random() < 0.2 else MAX)
        else:
            akind, amt = "OA", rng.randrange(1, 2 * 10**9)
        allowance[v] = amt
        blocks[2].append((v, [CallFrame(v, token, approve_data(spender, amt), 0)]))
        victim_info.append({"victim": v, "approval": akind, "approved": str(amt)})

    if kind == "model2":
        # honest usage before the exploit
        for v in victims:
            if balance[v] and rng.random() < 0.5:
                x = rng.randrange(1, min(balance[v], allowance[v], 10**6) + 1)
                balance[v] -= x
                allowance[v] -= x
                blocks[3].append((v, [
                    CallFrame(v, spender, _SEL_SWAP + rng.randbytes(32), 0),
                    CallFrame(spender, token, transfer_from_data(v, pool, x), 1),
                ]))

    attack_block = 4
    for info in victim_info:
        v = info["victim"]
        stolen = min(allowance[v], balance[v])
        info["pre_attack_balance"] = str(balance[v])
        info["pre_attack_allowance"] = str(allowance[v])
        info["stolen"] = str(stolen)
        balance[v] -= stolen
        allowance[v] -= stolen
        info["post_attack_balance"] = str(balance[v])
        info["post_attack_allowance"] = str(allowance[v])
        if kind == "model1":
            head = CallFrame(attacker, spender, _SEL_SWAP + _word_addr(v), 0)
        else:
            head = CallFrame(attacker, spender, bytes.fromhex("deadbeef") + rng.randbytes(64), 0)
        blocks[attack_block].append((attacker, [head, CallFrame(spender, token, transfer_from_data(v, attacker, stolen), 1)]))

    with open(corpus_path, "w", encoding="utf-8", newline="\n") as out:
        for b in sorted(blocks):
            for index, (sender, frames) in enumerate(blocks[b]):
                n = nonces.get(sender, 0)
                nonces[sender] = n + 1
                rec = TxRecord("0x" + rng.randbytes(32).hex(), b, index, n, TxStatus.SUCCEEDED, tuple(frames))
                out.write(emit_record(rec))
                out.write("\n")
    if registry_path is not None:
        write_registry(registry, registry_path)
    truth = {
        "seed": seed,
        "prng": "MT19937 (random.Random)",
        "spec": {"kind": kind, "n_victims": n_victims, "ua_rate": ua_rate, "unfunded_rate": unfunded_rate},
        "events": None,
        "final_state": None,
        "behaviors": None,
        "attack": {
            "kind": kind,
            "token": token,
            "spender": spender,
            "attacker": attacker,
            "attack_block": attack_block,
            "victims": victim_info,
            "total_stolen": str(sum(int(i["stolen"]) for i in victim_info)),
        },
    }
    if truth_path is not None:
        with open(truth_path, "w", encoding="utf-8") as fh:
            json.dump(truth, fh)
            fh.write("\n")
    return truth


# -- adversarial corpora ----------------------------------------------------

def adversarial_corpus(seed: int, n_events: int = 1000, n_users: int = 6, n_tokens: int = 2):
    """
    Records built to stress the ledger rather than to look realistic: debits
    beyond balance or allowance, max and zero approvals, self transfers,
    owners approving themselves, mints and burns,
    several events per transaction and repeated blocks.

    Returns ``(records, registry)``; every record succeeds and holds between
    one and three decodable frames, so roughly ``n_events`` events result.
    """
    rng = random.Random(seed)
    addr = lambda: "0x" + rng.randbytes(20).hex()  # noqa: E731
    tokens = [addr() for _ in range(n_tokens)]
    registry = TokenRegistry()
    for t in tokens:
        registry.add(t, TokenMeta(TokenStandard.ERC20, rng.choice([None, 10**24]), 18))
    users = [addr() for _ in range(n_users)]
    amounts = (0, 1, 2, 3, 10**6, 10**24, MAX - 1, MAX)

    def amount():
        return rng.choice(amounts) if rng.random() < 0.3 else rng.randrange(0, 2000)

    def frame(depth):
        t = rng.choice(tokens)
        a, b = rng.choice(users), rng.choice(users)
        r = rng.random()
        if r < 0.25:
            return a, CallFrame(a, t, approve_data(b, amount()), 0)
        if r < 0.6:
            receiver = ZERO if rng.random() < 0.1 else rng.choice(users)
            return b, CallFrame(b, t, transfer_from_data(a, receiver, amount()), depth)
        sender = ZERO if rng.random() < 0.3 else a
        receiver = ZERO if rng.random() < 0.1 else b
        return sender, CallFrame(sender, t, transfer_data(receiver, rng.randrange(0, 5000)), depth)

    records = []
    block, index, produced = 1, 0, 0
    while produced < n_events:
        if rng.random() < 0.3:
            block += rng.randrange(1, 3)
            index = 0
        want = min(rng.randrange(1, 4), n_events - produced)
        sender, head = frame(0)
        frames = [head]
        for _ in range(want - 1):
            # extra events ride on internal frames; approve only counts at depth 0
            _, f = frame(1)
            while f.input[:4] == _SEL_APPROVE:
                _, f = frame(1)
            frames.append(f)
        records.append(TxRecord("0x" + rng.randbytes(32).hex(), block, index, 0, TxStatus.SUCCEEDED, tuple(frames)))
        index += 1
        produced += want
    return records, registry
