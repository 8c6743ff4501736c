import pytest

from approval_lens.synth import GenSpec, generate_corpus, load_truth

QUOTAS = {"M1": [8, 4], "M2": [8, 4], "M3": [0, 6], "M4": [0, 6], "M5": [10, 6]}


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("small")
    spec = GenSpec(seed=11, n_txs=1500, n_blocks=60, mode_quotas=QUOTAS)
    generate_corpus(spec, d / "corpus.jsonl", d / "truth.json", d / "registry.jsonl")
    return d, load_truth(d / "truth.json")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=lambda k: int(str(k).rstrip("a"))):
        terminalreporter.write_line(results[key])
