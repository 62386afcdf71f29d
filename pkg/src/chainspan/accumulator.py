"""One-way accumulator over cross-chain transaction ids.

RSA-style construction: a set commits to g^(prod of element primes) mod N,
which is quasi-commutative (any insertion order yields the same digest) and
supports dynamic adds. Element ids map to odd 64-bit primes via
hash-then-increment with a counter and a 64-round Miller-Rabin check.
Setup generates the modulus from a seed and discards the prime factors;
this stands in for the distributed parameter ceremony of a real deployment
(trust caveat documented in the README).

Deletion and non-membership witnesses are deliberately absent: the sync
protocols only ever add elements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .encoding import (
    TAG_PRIME,
    TAG_SETUP,
    Reader,
    enc_bigint,
    enc_bytes,
    enc_u64,
    sha256,
    tagged_hash,
)

MIN_MODULUS_BITS = 512

_SMALL_PRIMES = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67]


class AccumulatorError(Exception):
    pass


class WeakParams(AccumulatorError):
    pass


class NotMember(AccumulatorError):
    pass


def is_probable_prime(n: int, rounds: int = 64) -> bool:
    """Miller-Rabin with bases derived from the candidate, so the answer is
    deterministic for a given n."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    seed = n.to_bytes((n.bit_length() + 7) // 8, "big")
    for i in range(rounds):
        a = 2 + int.from_bytes(sha256(seed + i.to_bytes(4, "big")), "big") % (n - 3)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = (x * x) % n
            if x == n - 1:
                break
        else:
            return False
    return True


@lru_cache(maxsize=None)
def hash_to_prime(elem: bytes) -> int:
    """Deterministic odd prime > 2^32 for an element id.

    Hash-then-increment: candidates come from H(tag || elem || counter) with
    the top and bottom bits forced, so every candidate is an odd 64-bit
    integer; the counter advances until a candidate passes Miller-Rabin.
    """
    counter = 0
    while True:
        digest = tagged_hash(TAG_PRIME, enc_bytes(elem), enc_u64(counter))
        candidate = int.from_bytes(digest[:8], "big") | (1 << 63) | 1
        if is_probable_prime(candidate):
            return candidate
        counter += 1


@dataclass(frozen=True)
class AccParams:
    modulus_bits: int
    modulus: int
    generator: int


@dataclass(frozen=True)
class AccumulatorDigest:
    value: int
    element_count: int


@dataclass(frozen=True)
class MembershipWitness:
    value: int
    for_element: bytes
    at_digest: AccumulatorDigest


def _seeded_prime(seed: bytes, label: bytes, bits: int) -> int:
    """Deterministic prime of exactly `bits` bits from a seeded hash stream."""
    attempt = 0
    while True:
        stream = b""
        counter = 0
        while len(stream) * 8 < bits:
            stream += tagged_hash(TAG_SETUP, enc_bytes(seed), label, enc_u64(attempt), enc_u64(counter))
            counter += 1
        candidate = int.from_bytes(stream[: (bits + 7) // 8], "big")
        candidate |= (1 << (bits - 1)) | (1 << (bits - 2)) | 1
        candidate &= (1 << bits) - 1
        for _ in range(4096):
            if is_probable_prime(candidate):
                return candidate
            candidate += 2
        attempt += 1


def setup(modulus_bits: int, seed: bytes) -> AccParams:
    """Seeded one-shot parameter ceremony; the factors are locals that go out
    of scope here and are retained nowhere."""
    if modulus_bits < MIN_MODULUS_BITS:
        raise WeakParams(f"modulus_bits {modulus_bits} below floor {MIN_MODULUS_BITS}")
    half = modulus_bits // 2
    p = _seeded_prime(seed, b"p", half)
    q = _seeded_prime(seed, b"q", modulus_bits - half)
    if p == q:
        q = _seeded_prime(seed, b"q2", modulus_bits - half)
    modulus = p * q
    counter = 0
    while True:
        g = int.from_bytes(
            tagged_hash(TAG_SETUP, enc_bytes(seed), b"g", enc_u64(counter)) * ((modulus_bits // 256) + 1),
            "big",
        ) % (modulus - 3) + 2
        if math.gcd(g, modulus) == 1:
            break
        counter += 1
    return AccParams(modulus_bits=modulus_bits, modulus=modulus, generator=g)


def empty_digest(pp: AccParams) -> AccumulatorDigest:
    """Initial digest: the generator, before any element is added."""
    return AccumulatorDigest(value=pp.generator, element_count=0)


def commit(pp: AccParams, elems: Sequence[bytes]) -> AccumulatorDigest:
    exponent = math.prod(hash_to_prime(e) for e in elems) if elems else 1
    return AccumulatorDigest(value=pow(pp.generator, exponent, pp.modulus), element_count=len(elems))


def add(pp: AccParams, digest: AccumulatorDigest, elems: Sequence[bytes]) -> AccumulatorDigest:
    """Fold new elements into the digest. Duplicate protection is the
    caller's job (tx ids are unique by construction)."""
    if not elems:
        return digest
    exponent = math.prod(hash_to_prime(e) for e in elems)
    return AccumulatorDigest(
        value=pow(digest.value, exponent, pp.modulus),
        element_count=digest.element_count + len(elems),
    )


def create_mem_wit(pp: AccParams, elems: Sequence[bytes], digest: AccumulatorDigest, elem: bytes) -> MembershipWitness:
    """Witness = accumulator of everything except `elem`. Cheaply re-checks
    that the supplied digest really commits to `elems`."""
    if elem not in elems:
        raise NotMember("element is not in the accumulated set")
    exponent = 1
    for e in elems:
        if e != elem:
            exponent *= hash_to_prime(e)
    value = pow(pp.generator, exponent, pp.modulus)
    if pow(value, hash_to_prime(elem), pp.modulus) != digest.value:
        raise AccumulatorError("digest does not commit to the supplied set")
    return MembershipWitness(value=value, for_element=elem, at_digest=digest)


def verify_mem(pp: AccParams, digest: AccumulatorDigest, elem: bytes, wit: MembershipWitness) -> bool:
    if not 0 < wit.value < pp.modulus:
        return False
    return pow(wit.value, hash_to_prime(elem), pp.modulus) == digest.value


# ---------------------------------------------------------------------------
# Wire formats
# ---------------------------------------------------------------------------

def digest_width(pp: AccParams) -> int:
    return (pp.modulus_bits + 7) // 8


def encode_digest(pp: AccParams, digest: AccumulatorDigest) -> bytes:
    return digest.value.to_bytes(digest_width(pp), "big") + enc_u64(digest.element_count)


def decode_digest(pp: AccParams, reader: Reader) -> AccumulatorDigest:
    value = reader.bigint_fixed(digest_width(pp))
    count = reader.u64()
    return AccumulatorDigest(value=value, element_count=count)


def digest_hash(pp: AccParams, digest: AccumulatorDigest) -> bytes:
    return sha256(encode_digest(pp, digest))


def encode_witness(pp: AccParams, wit: MembershipWitness) -> bytes:
    """(element-id, digest-hash, value) per the documented wire format."""
    return enc_bytes(wit.for_element) + digest_hash(pp, wit.at_digest) + enc_bigint(wit.value)


def decode_witness(pp: AccParams, reader: Reader, against: AccumulatorDigest) -> MembershipWitness:
    """Rebind a serialized witness to a digest the caller already trusts;
    the embedded digest hash must match."""
    elem = reader.bytes_()
    dig_hash = reader.fixed(32)
    value = reader.bigint()
    if dig_hash != digest_hash(pp, against):
        raise AccumulatorError("witness bound to a different digest")
    return MembershipWitness(value=value, for_element=elem, at_digest=against)


def encode_params(pp: AccParams) -> bytes:
    return enc_u64(pp.modulus_bits) + enc_bigint(pp.modulus) + enc_bigint(pp.generator)


def decode_params(reader: Reader) -> AccParams:
    return AccParams(modulus_bits=reader.u64(), modulus=reader.bigint(), generator=reader.bigint())


def fold_elements(pp: AccParams, elems: Iterable[bytes]) -> AccumulatorDigest:
    """Fold of single adds starting from the empty digest; equals commit()."""
    digest = empty_digest(pp)
    for e in elems:
        digest = add(pp, digest, [e])
    return digest
