"""Canonical byte encoding shared by every hashed or serialized structure.

The wire format is deliberately dumb: fixed-width big-endian integers,
length-prefixed byte strings, and count-prefixed lists. Anything that gets
hashed (blocks, transactions, statements, proofs) goes through these helpers
so digests are reproducible across implementations.

Format rules:
  u8 / u32 / u64   big-endian fixed width
  bytes            u32 length prefix + raw bytes
  str              utf-8, encoded as bytes
  bigint           u32 length prefix + minimal big-endian magnitude
                   (non-negative only; zero encodes as length 0)
  list             u32 count prefix, elements concatenated
"""

from __future__ import annotations

import hashlib
from typing import Iterable

# One-byte domain separation tags so the same hash function can serve
# leaves, nodes, headers, tx ids etc. without cross-context collisions.
TAG_LEAF = b"\x00"
TAG_NODE = b"\x01"
TAG_HEADER = b"\x02"
TAG_TXID = b"\x03"
TAG_BEACON = b"\x04"
TAG_PRIME = b"\x05"
TAG_STATEMENT = b"\x06"
TAG_PROOF = b"\x07"
TAG_KEY = b"\x08"
TAG_CHANNEL = b"\x09"
TAG_SETUP = b"\x0a"

DIGEST_LEN = 32
ZERO_DIGEST = b"\x00" * DIGEST_LEN


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def tagged_hash(tag: bytes, *parts: bytes) -> bytes:
    h = hashlib.sha256()
    h.update(tag)
    for part in parts:
        h.update(part)
    return h.digest()


def enc_u8(value: int) -> bytes:
    return value.to_bytes(1, "big")


def enc_u32(value: int) -> bytes:
    return value.to_bytes(4, "big")


def enc_u64(value: int) -> bytes:
    return value.to_bytes(8, "big")


def enc_bytes(data: bytes) -> bytes:
    return enc_u32(len(data)) + data


def enc_str(text: str) -> bytes:
    return enc_bytes(text.encode("utf-8"))


def enc_bigint(value: int) -> bytes:
    if value < 0:
        raise ValueError("bigint encoding is unsigned")
    if value == 0:
        return enc_u32(0)
    raw = value.to_bytes((value.bit_length() + 7) // 8, "big")
    return enc_bytes(raw)


def enc_bigint_fixed(value: int, width: int) -> bytes:
    """Fixed-width bigint, used where encodings must be constant-size."""
    return value.to_bytes(width, "big")


def enc_list(items: Iterable[bytes]) -> bytes:
    chunks = list(items)
    return enc_u32(len(chunks)) + b"".join(chunks)


class Reader:
    """Sequential decoder over one byte string; raises on truncation."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def _take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise ValueError("truncated encoding")
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def u8(self) -> int:
        return self._take(1)[0]

    def u32(self) -> int:
        return int.from_bytes(self._take(4), "big")

    def u64(self) -> int:
        return int.from_bytes(self._take(8), "big")

    def bytes_(self) -> bytes:
        return self._take(self.u32())

    def str_(self) -> str:
        return self.bytes_().decode("utf-8")

    def bigint(self) -> int:
        return int.from_bytes(self.bytes_(), "big")

    def bigint_fixed(self, width: int) -> int:
        return int.from_bytes(self._take(width), "big")

    def fixed(self, n: int) -> bytes:
        return self._take(n)

    def count(self) -> int:
        return self.u32()

    def done(self) -> bool:
        return self._pos == len(self._data)

    def expect_done(self) -> None:
        if not self.done():
            raise ValueError("trailing bytes in encoding")
