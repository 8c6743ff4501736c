"""
Approve, then spend: the shapes users leave behind.

Each (owner, spender, token) history is a string of approvals (A) and
spends (E). We classify the shapes and check whether they clean up after
themselves.
"""
from approval_lens.behavior import A, E, brute_force_good_practice, check_good_practice, classify_mode

usdt = 10**6
histories = {
    "exact one-off": [A("OA", 50 * usdt), E(50 * usdt)],
    "split spend": [A("OA", 50 * usdt), E(20 * usdt), E(30 * usdt)],
    "approve and forget": [A("UA")],
    "re-approve then spend": [A("OA", 5), A("OA", 9), E(9)],
    "unlimited, revoked": [A("UA"), E(5567 * usdt), E(5567 * usdt + 300_000), A("ZA"),
                           A("UA"), E(1234 * usdt), A("ZA")],
    "unlimited, never revoked": [A("UA"), E(5567 * usdt), E(5567 * usdt + 300_000), A("ZA"),
                                 A("UA"), E(1234 * usdt)],
    "spend before approve": [E(3), A("OA", 3), E(3)],
}

for name, seq in histories.items():
    good, blocks = check_good_practice(seq)
    print(f"{name:26s} {classify_mode(seq).value:9s} good={good!s:5s} {blocks or ''}")

# the block scan never needs to backtrack; brute force over all cut points agrees
assert all(check_good_practice(s)[0] == brute_force_good_practice(s) for s in histories.values())
