from approval_lens.decode import ApprovalEvent, ExecutionEvent, TransferEvent


def truth_key(e):
    """Ground-truth event dict -> comparable tuple."""
    pos = (e["block"], e["index"], e["frame"], e["tx"])
    if e["type"] == "approve":
        return ("approve", *pos, e["token"], e["from"], e["spender"], int(e["amount"]), e["kind"])
    if e["type"] == "exec":
        return ("exec", *pos, e["token"], e["owner"], e["spender"], e["receiver"], int(e["amount"]))
    return ("transfer", *pos, e["token"], e["from"], e["to"], int(e["amount"]))


def event_key(ev):
    pos = (ev.block_number, ev.tx_index, ev.frame, ev.tx_hash)
    if type(ev) is ApprovalEvent:
        return ("approve", *pos, ev.token, ev.sender, ev.spender, ev.amount, ev.kind.value)
    if type(ev) is ExecutionEvent:
        return ("exec", *pos, ev.token, ev.owner, ev.spender, ev.receiver, ev.amount)
    assert type(ev) is TransferEvent
    return ("transfer", *pos, ev.token, ev.sender, ev.receiver, ev.amount)


def state_as_truth(tokens):
    """Ledger token states in the ground-truth final_state layout."""
    out = {}
    for t in sorted(tokens):
        st = tokens[t]
        out[t] = {
            "balances": {a: str(v) for a, v in sorted(st.balance_of.items()) if v},
            "allowances": [[o, s, str(v)] for (o, s), v in sorted(st.allowance.items()) if v],
        }
    return out


def same_state(tokens, truth_state):
    mine = state_as_truth(tokens)
    # tokens that saw only zero-valued activity may be absent on either side
    nonempty = lambda d: {t: v for t, v in d.items() if v["balances"] or v["allowances"]}  # noqa: E731
    return nonempty(mine) == nonempty(truth_state)
