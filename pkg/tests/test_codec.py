"""Canonical encoding layer.

Oracle values here are computed with hashlib/struct directly, never with
the code under test.
"""

import hashlib
import struct

import pytest
from hypothesis import given, strategies as st

from coaatchain import codec

# Frozen SHA-256 vectors (FIPS 180-2 examples).
SHA_VECTORS = {
    b"": "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855",
    b"abc": "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad",
    b"a": "ca978112ca1bbdcafac231b39a23dc4da786eff8147c4e72b9807785afee48bb",
}


def test_sha256_vectors():
    for data, hexdigest in SHA_VECTORS.items():
        assert codec.sha256(data).hex() == hexdigest


def test_fixed_width_ints_against_struct():
    assert codec.u8(0) == b"\x00"
    assert codec.u8(255) == struct.pack(">B", 255)
    assert codec.u32(305419896) == struct.pack(">I", 305419896)
    assert codec.u64(2**63) == struct.pack(">Q", 2**63)


@pytest.mark.parametrize("fn,bad", [
    (codec.u8, -1), (codec.u8, 256),
    (codec.u32, -1), (codec.u32, 2**32),
    (codec.u64, -1), (codec.u64, 2**64),
])
def test_int_range_checks(fn, bad):
    with pytest.raises(ValueError):
        fn(bad)


def test_length_prefix_layout():
    assert codec.lp(b"abc") == b"\x00\x00\x00\x03abc"
    assert codec.lp_str("é") == b"\x00\x00\x00\x02\xc3\xa9"


def test_reader_strictness():
    r = codec.Reader(codec.u32(7) + codec.lp(b"xy"))
    assert r.u32() == 7
    assert r.lp() == b"xy"
    r.expect_end()

    r = codec.Reader(b"\x00")
    with pytest.raises(ValueError):
        r.u32()

    r = codec.Reader(b"\x00\x00")
    with pytest.raises(ValueError):
        r.expect_end()


def test_tree_encoding_is_tagged_and_sorted():
    # Oracle: byte-for-byte layout written by hand.
    assert codec.encode_tree(None) == b"\x00"
    assert codec.encode_tree(False) == b"\x01"
    assert codec.encode_tree(True) == b"\x02"
    assert codec.encode_tree(5) == b"\x03" + (5).to_bytes(8, "big")
    assert codec.encode_tree(b"hi") == b"\x04\x00\x00\x00\x02hi"
    assert codec.encode_tree("hi") == b"\x05\x00\x00\x00\x02hi"
    assert codec.encode_tree([1]) == b"\x06\x00\x00\x00\x01" + codec.encode_tree(1)
    # map keys come out sorted by UTF-8 bytes regardless of insert order
    ab = codec.encode_tree({"a": 1, "b": 2})
    ba = codec.encode_tree({"b": 2, "a": 1})
    assert ab == ba
    assert ab == (
        b"\x07\x00\x00\x00\x02"
        + codec.lp_str("a") + codec.encode_tree(1)
        + codec.lp_str("b") + codec.encode_tree(2)
    )


def test_decode_rejects_unsorted_and_trailing():
    good = codec.encode_tree({"a": 1, "b": 2})
    # swap the two key-value chunks to fake an unsorted map
    body = good[5:]
    a_len = len(codec.lp_str("a") + codec.encode_tree(1))
    swapped = good[:5] + body[a_len:] + body[:a_len]
    with pytest.raises(ValueError):
        codec.decode_tree(swapped)
    with pytest.raises(ValueError):
        codec.decode_tree(good + b"\x00")
    with pytest.raises(ValueError):
        codec.decode_tree(b"\xff")


def test_tree_hash_is_sha256_of_encoding():
    value = {"k": [1, b"\x00", None]}
    assert codec.tree_hash(value) == hashlib.sha256(codec.encode_tree(value)).digest()


trees = st.recursive(
    st.none()
    | st.booleans()
    | st.integers(min_value=0, max_value=codec.U64_MAX)
    | st.binary(max_size=64)
    | st.text(max_size=32),
    lambda children: st.lists(children, max_size=4)
    | st.dictionaries(st.text(max_size=8), children, max_size=4),
    max_leaves=20,
)


@given(trees)
def test_tree_roundtrip(value):
    encoded = codec.encode_tree(value)
    decoded = codec.decode_tree(encoded)
    # lists come back as lists; everything else is structurally equal
    assert codec.encode_tree(decoded) == encoded


@given(trees, trees)
def test_tree_encoding_injective_on_distinct_hashes(a, b):
    ea, eb = codec.encode_tree(a), codec.encode_tree(b)
    if ea == eb:
        assert codec.tree_hash(a) == codec.tree_hash(b)
    else:
        assert codec.sha256(ea) != codec.sha256(eb) or ea == eb


@given(st.binary(max_size=128))
def test_lp_roundtrip(data):
    r = codec.Reader(codec.lp(data))
    assert r.lp() == data
    r.expect_end()
