import json
import os

import pytest
from hypothesis import given, settings, strategies as st

from approval_lens.errors import (DuplicateToken, MalformedRecord, MalformedRegistry, OrderViolation,
                                  SourceUnavailable)
from approval_lens.ingest import (MAX_UINT256, CallFrame, TokenMeta, TokenRegistry, TokenStandard, TxRecord,
                                  TxStatus, emit_record, load_registry, parse_record, stream_corpus,
                                  write_corpus, write_registry)

A1 = "0x" + "11" * 20
A2 = "0x" + "22" * 20
TOKEN = "0x" + "33" * 20


def rec(block, index, frames=None, status=TxStatus.SUCCEEDED, h=None):
    frames = frames or (CallFrame(A1, TOKEN, b"\x01\x02", 0),)
    return TxRecord(h or "0x%064x" % (block * 1000 + index), block, index, 0, status, tuple(frames))


addresses = st.binary(min_size=20, max_size=20).map(lambda b: "0x" + b.hex())
frames = st.builds(CallFrame, addresses, addresses, st.binary(max_size=80), st.integers(0, 5))
records = st.builds(
    TxRecord,
    st.binary(min_size=32, max_size=32).map(lambda b: "0x" + b.hex()),
    st.integers(0, 10**9), st.integers(0, 10**4), st.integers(0, 10**6),
    st.sampled_from(TxStatus),
    st.lists(frames, min_size=0, max_size=4).map(
        lambda fs: (CallFrame(A1, A2, b"", 0),) + tuple(f._replace(depth=f.depth + 1) for f in fs)),
)


@given(records)
@settings(max_examples=200)
def test_emit_parse_roundtrip(r):
    line = emit_record(r)
    assert parse_record(line) == r
    assert parse_record(line.encode()) == r
    assert emit_record(parse_record(line)) == line


def test_parse_accepts_reordered_keys():
    r = rec(5, 2)
    obj = json.loads(emit_record(r))
    shuffled = json.dumps(dict(reversed(list(obj.items()))))
    assert parse_record(shuffled) == r


@pytest.mark.parametrize("mutate,needle", [
    (lambda o: o.pop("status"), "status"),
    (lambda o: o.update(status="maybe"), "status"),
    (lambda o: o.update(block=-1), "block"),
    (lambda o: o.update(block=1.5), "block"),
    (lambda o: o.update(tx_hash="0x12"), "tx_hash"),
    (lambda o: o.update(frames=[]), "frames"),
    (lambda o: o["frames"][0].update(caller="0xABC"), "address"),
    (lambda o: o["frames"][0].update(caller="0x" + "AB" * 20), "address"),
    (lambda o: o["frames"][0].update(input="0x123"), "hex"),
    (lambda o: o["frames"][0].update(input="0x12 3"), "hex"),
    (lambda o: o["frames"][0].update(depth=1), "depth"),
    (lambda o: o["frames"][0].update(depth=-1), "depth"),
])
def test_malformed_records_rejected(mutate, needle):
    obj = json.loads(emit_record(rec(1, 0)))
    mutate(obj)
    with pytest.raises(MalformedRecord) as exc:
        parse_record(json.dumps(obj), lineno=7)
    assert "line 7" in str(exc.value)
    assert needle in str(exc.value).lower()


def test_not_json():
    with pytest.raises(MalformedRecord):
        parse_record("{nope", 1)
    with pytest.raises(MalformedRecord):
        parse_record("[1,2]", 1)


def test_stream_sorted_file(tmp_path):
    rs = [rec(b, i) for b in range(1, 6) for i in range(3)]
    write_corpus(rs, tmp_path / "c.jsonl")
    assert list(stream_corpus(tmp_path / "c.jsonl")) == rs
    assert list(stream_corpus(tmp_path / "c.jsonl", (2, 3))) == [r for r in rs if 2 <= r.block_number <= 3]
    assert list(stream_corpus(tmp_path / "c.jsonl", (4, 2))) == []


@pytest.mark.parametrize("chunk", [1, 3, 1000])
def test_stream_unsorted_file_external_sort(tmp_path, chunk):
    rs = [rec(b, i) for b in range(1, 8) for i in range(4)]
    shuffled = rs[::-1][5:] + rs[::-1][:5]
    write_corpus(shuffled, tmp_path / "c.jsonl")
    assert list(stream_corpus(tmp_path / "c.jsonl", chunk_size=chunk, tmpdir=tmp_path)) == rs
    # scratch runs are cleaned up
    assert sorted(os.listdir(tmp_path)) == ["c.jsonl"]


def test_stream_merges_files(tmp_path):
    rs = [rec(b, i) for b in range(1, 10) for i in range(2)]
    write_corpus(rs[0::3], tmp_path / "a.jsonl")
    write_corpus(rs[1::3][::-1], tmp_path / "b.jsonl")
    write_corpus(rs[2::3], tmp_path / "c.jsonl")
    got = list(stream_corpus([tmp_path / n for n in ("a.jsonl", "b.jsonl", "c.jsonl")]))
    assert got == rs


def test_blank_lines_skipped(tmp_path):
    rs = [rec(1, 0), rec(1, 1), rec(2, 0)]
    (tmp_path / "c.jsonl").write_text("\n".join(emit_record(r) for r in rs).replace("\n", "\n\n") + "\n")
    assert list(stream_corpus(tmp_path / "c.jsonl")) == rs


def test_duplicate_key_is_order_violation(tmp_path):
    write_corpus([rec(1, 0), rec(1, 0, h="0x" + "ff" * 32)], tmp_path / "c.jsonl")
    with pytest.raises(OrderViolation):
        list(stream_corpus(tmp_path / "c.jsonl"))
    write_corpus([rec(1, 0)], tmp_path / "a.jsonl")
    with pytest.raises(OrderViolation):
        list(stream_corpus([tmp_path / "a.jsonl", tmp_path / "c.jsonl"]))


def test_malformed_line_reports_line_number(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text(emit_record(rec(1, 0)) + "\n" + '{"block":1,"index":1,"frames":[]}\n')
    with pytest.raises(MalformedRecord, match="line 2"):
        list(stream_corpus(p))


def test_missing_source(tmp_path):
    with pytest.raises(SourceUnavailable):
        list(stream_corpus(tmp_path / "nope.jsonl"))


@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), unique=True, max_size=60),
       st.integers(1, 7))
@settings(max_examples=40, deadline=None)
def test_stream_order_property(tmp_path_factory, keys, chunk):
    d = tmp_path_factory.mktemp("s")
    write_corpus([rec(b, i) for b, i in keys], d / "c.jsonl")
    got = [r.key for r in stream_corpus(d / "c.jsonl", chunk_size=chunk, tmpdir=d)]
    assert got == sorted(keys)


def test_registry_roundtrip(tmp_path):
    reg = TokenRegistry()
    reg.add(TOKEN, TokenMeta(TokenStandard.ERC20, 10**24, 18))
    reg.add(A2, TokenMeta(TokenStandard.ERC721, None, 0))
    write_registry(reg, tmp_path / "r.jsonl")
    back = load_registry(tmp_path / "r.jsonl")
    assert dict(back.items()) == dict(reg.items())
    assert back.lookup(A1).standard is TokenStandard.UNKNOWN
    assert back.erc721_addresses() == {A2}


def test_registry_duplicate(tmp_path):
    line = json.dumps({"address": TOKEN, "standard": "erc20", "total_supply": "5", "decimals": 1})
    (tmp_path / "r.jsonl").write_text(line + "\n" + line + "\n")
    with pytest.raises(DuplicateToken):
        load_registry(tmp_path / "r.jsonl")


@pytest.mark.parametrize("entry", [
    {"address": "0x12", "standard": "erc20"},
    {"address": TOKEN, "standard": "erc1155"},
    {"address": TOKEN, "standard": "erc20", "total_supply": str(MAX_UINT256 + 1)},
    {"address": TOKEN, "standard": "erc20", "total_supply": "-3"},
    {"address": TOKEN, "standard": "erc20", "decimals": 99},
])
def test_registry_malformed(tmp_path, entry):
    (tmp_path / "r.jsonl").write_text(json.dumps(entry) + "\n")
    with pytest.raises(MalformedRegistry):
        load_registry(tmp_path / "r.jsonl")
