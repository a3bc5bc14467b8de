"""Canonical byte encodings.

Two layers live here:

* field primitives: fixed-width big-endian integers and length-prefixed
  byte strings, concatenated in declared field order. Transaction payloads
  and block headers are built from these, so the resulting digests are
  byte-stable across runs and platforms.

* a self-describing tree codec for whole application state. Maps are
  encoded with keys sorted by UTF-8 bytes, making the encoding canonical:
  equal trees encode to equal bytes. State roots are SHA-256 over this
  encoding, and snapshots store the encoding itself (so a snapshot re-hashes
  to its own state root).
"""

from __future__ import annotations

import hashlib

U8_MAX = 0xFF
U32_MAX = 0xFFFFFFFF
U64_MAX = 0xFFFFFFFFFFFFFFFF


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def u8(n: int) -> bytes:
    if not 0 <= n <= U8_MAX:
        raise ValueError(f"u8 out of range: {n}")
    return n.to_bytes(1, "big")


def u32(n: int) -> bytes:
    if not 0 <= n <= U32_MAX:
        raise ValueError(f"u32 out of range: {n}")
    return n.to_bytes(4, "big")


def u64(n: int) -> bytes:
    if not 0 <= n <= U64_MAX:
        raise ValueError(f"u64 out of range: {n}")
    return n.to_bytes(8, "big")


def lp(data: bytes) -> bytes:
    """Length-prefix a variable-size byte string."""
    return u32(len(data)) + data


def lp_str(s: str) -> bytes:
    return lp(s.encode("utf-8"))


class Reader:
    """Strict sequential decoder for the field primitives."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("truncated encoding")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "big")

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "big")

    def lp(self) -> bytes:
        return self.take(self.u32())

    def lp_str(self) -> str:
        return self.lp().decode("utf-8")

    def expect_end(self) -> None:
        if self.pos != len(self.data):
            raise ValueError("trailing bytes in encoding")


# Tree codec tags
_T_NULL = 0x00
_T_FALSE = 0x01
_T_TRUE = 0x02
_T_INT = 0x03
_T_BYTES = 0x04
_T_STR = 0x05
_T_LIST = 0x06
_T_MAP = 0x07

Tree = None | bool | int | bytes | str | list | dict


def encode_tree(value: Tree) -> bytes:
    """Canonically encode a tree of null/bool/int/bytes/str/list/map values.

    Map keys must be strings and are written sorted by their UTF-8 bytes.
    Integers must fit an unsigned 64-bit value. bool is checked before int
    because bool subclasses int.
    """
    if value is None:
        return bytes([_T_NULL])
    if isinstance(value, bool):
        return bytes([_T_TRUE if value else _T_FALSE])
    if isinstance(value, int):
        return bytes([_T_INT]) + u64(value)
    if isinstance(value, bytes):
        return bytes([_T_BYTES]) + lp(value)
    if isinstance(value, str):
        return bytes([_T_STR]) + lp_str(value)
    if isinstance(value, (list, tuple)):
        out = [bytes([_T_LIST]), u32(len(value))]
        out.extend(encode_tree(item) for item in value)
        return b"".join(out)
    if isinstance(value, dict):
        items = sorted(value.items(), key=lambda kv: kv[0].encode("utf-8"))
        out = [bytes([_T_MAP]), u32(len(items))]
        for key, item in items:
            if not isinstance(key, str):
                raise TypeError(f"map keys must be str, got {type(key).__name__}")
            out.append(lp_str(key))
            out.append(encode_tree(item))
        return b"".join(out)
    raise TypeError(f"unencodable value of type {type(value).__name__}")


def decode_tree(data: bytes) -> Tree:
    """Decode a canonical tree encoding, rejecting non-canonical input."""
    reader = Reader(data)
    value = _decode(reader)
    reader.expect_end()
    return value


def _decode(r: Reader) -> Tree:
    tag = r.u8()
    if tag == _T_NULL:
        return None
    if tag == _T_FALSE:
        return False
    if tag == _T_TRUE:
        return True
    if tag == _T_INT:
        return r.u64()
    if tag == _T_BYTES:
        return r.lp()
    if tag == _T_STR:
        return r.lp_str()
    if tag == _T_LIST:
        count = r.u32()
        return [_decode(r) for _ in range(count)]
    if tag == _T_MAP:
        count = r.u32()
        out: dict[str, Tree] = {}
        prev: bytes | None = None
        for _ in range(count):
            key = r.lp_str()
            raw = key.encode("utf-8")
            if prev is not None and raw <= prev:
                raise ValueError("map keys not strictly sorted")
            prev = raw
            out[key] = _decode(r)
        return out
    raise ValueError(f"unknown tree tag 0x{tag:02x}")


def tree_hash(value: Tree) -> bytes:
    return sha256(encode_tree(value))
