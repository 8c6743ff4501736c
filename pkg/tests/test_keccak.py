import os

import pytest
from Crypto.Hash import keccak as oracle
from hypothesis import given, settings, strategies as st

from approval_lens.keccak import keccak256


def reference(data):
    return oracle.new(digest_bits=256, data=data).digest()


def test_empty_string_digest():
    assert keccak256(b"").hex() == "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"


@pytest.mark.parametrize("n", [0, 1, 134, 135, 136, 137, 271, 272, 273, 1000])
def test_rate_boundaries(n):
    data = os.urandom(n)
    assert keccak256(data) == reference(data)


@given(st.binary(max_size=600))
@settings(max_examples=300)
def test_matches_reference(data):
    assert keccak256(data) == reference(data)


def test_accepts_bytearray_and_memoryview():
    assert keccak256(bytearray(b"abc")) == keccak256(memoryview(b"abc")) == keccak256(b"abc")
