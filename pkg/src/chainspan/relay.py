"""Relay-node cluster management: disjoint per-parachain groups, state
pulling, beacon-driven rescheduling under denial of service, and recording
payloads onto the relay chain.

The randomness beacon is a seeded hash chain standing in for a distributed
beacon service; every party holding (seed, counter) derives the same
scheduling decisions, which is what the rescheduling defense needs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Collection, Iterator, Optional, Sequence

from . import core
from .encoding import TAG_BEACON, enc_bytes, enc_u64, enc_u8, tagged_hash


class RelayError(Exception):
    pass


class InsufficientNodes(RelayError):
    pass


class PullTimeout(RelayError):
    """All group members are corrupted; the reschedule path takes over."""


class RejectedPayload(RelayError):
    pass


@dataclass(frozen=True)
class Beacon:
    seed: bytes
    counter: int = 0

    def output(self) -> bytes:
        return tagged_hash(TAG_BEACON, enc_bytes(self.seed), enc_u64(self.counter))

    def next(self) -> "Beacon":
        return Beacon(self.seed, self.counter + 1)


def _uint_stream(beacon: Beacon) -> Iterator[int]:
    """Unbounded stream of 64-bit integers derived from one beacon output."""
    i = 0
    while True:
        block = tagged_hash(TAG_BEACON, beacon.output(), enc_u64(i))
        for off in range(0, 32, 8):
            yield int.from_bytes(block[off : off + 8], "big")
        i += 1


def beacon_sample(beacon: Beacon, pool: Sequence[str], count: int) -> tuple[str, ...]:
    """Deterministic sample without replacement, driven by the beacon stream
    with rejection so the draw is uniform and reproducible everywhere."""
    if count > len(pool):
        raise InsufficientNodes(f"cannot draw {count} from pool of {len(pool)}")
    remaining = list(pool)
    picked = []
    stream = _uint_stream(beacon)
    for _ in range(count):
        n = len(remaining)
        limit = (2**64 // n) * n
        while True:
            r = next(stream)
            if r < limit:
                break
        picked.append(remaining.pop(r % n))
    return tuple(picked)


@dataclass(frozen=True)
class RelayGroup:
    group_id: int
    members: tuple[str, ...]
    target: core.ChainId
    epoch: int = 0


def divide_groups(
    roster: Sequence[str],
    n: int,
    beacon: Beacon,
    group_size: int,
    targets: Optional[Sequence[core.ChainId]] = None,
) -> list[RelayGroup]:
    """Divide the cluster into n disjoint groups of `group_size`, selection
    determined by the beacon output."""
    if len(roster) < n * group_size:
        raise InsufficientNodes(
            f"roster of {len(roster)} cannot host {n} groups of {group_size}"
        )
    if targets is None:
        targets = core.PARACHAINS[:n]
    drawn = beacon_sample(beacon, roster, n * group_size)
    return [
        RelayGroup(
            group_id=i,
            members=drawn[i * group_size : (i + 1) * group_size],
            target=targets[i],
            epoch=0,
        )
        for i in range(n)
    ]


def reschedule_group(
    roster: Sequence[str],
    old: RelayGroup,
    beacon: Beacon,
    reserved: Collection[str] = (),
) -> RelayGroup:
    """Randomly select a replacement group; members of other parachains'
    groups are excluded so disjointness survives the reschedule."""
    pool = [n for n in roster if n not in set(reserved)]
    members = beacon_sample(beacon, pool, len(old.members))
    return RelayGroup(
        group_id=old.group_id,
        members=members,
        target=old.target,
        epoch=old.epoch + 1,
    )


def pull_blocks(
    group: RelayGroup,
    parachain: core.Chain,
    last_pulled_height: int,
    corrupted: Collection[str] = (),
) -> list[core.Block]:
    """All blocks above `last_pulled_height`; needs at least one responsive
    (non-corrupted) group member."""
    if group.target != parachain.chain_id:
        raise RelayError(f"group {group.group_id} targets {group.target}, not {parachain.chain_id}")
    if all(m in corrupted for m in group.members):
        raise PullTimeout(f"group {group.group_id} epoch {group.epoch} is fully corrupted")
    if last_pulled_height >= parachain.height:
        return []
    return list(parachain.blocks[last_pulled_height + 1 :])


class RecordKind(enum.Enum):
    STATE_PROOF = 0
    CT_RECORD = 1
    WITNESS_RECORD = 2


def make_record_tx(kind: RecordKind, payload: bytes) -> core.Transaction:
    """Wrap a relay payload as an intra-chain record transaction. The nonce
    is derived from the payload, so replaying an identical record yields the
    same tx id and gets deduplicated like any other replay."""
    body = enc_u8(kind.value) + enc_bytes(payload)
    nonce = int.from_bytes(tagged_hash(TAG_BEACON, b"record", body)[:8], "big")
    return core.make_tx(core.TxKind.INTRA_CHAIN, body, nonce)


def parse_record_tx(tx: core.Transaction) -> Optional[tuple[RecordKind, bytes]]:
    if tx.kind != core.TxKind.INTRA_CHAIN or len(tx.payload) < 5:
        return None
    kind_byte = tx.payload[0]
    try:
        kind = RecordKind(kind_byte)
    except ValueError:
        return None
    length = int.from_bytes(tx.payload[1:5], "big")
    body = tx.payload[5 : 5 + length]
    if len(body) != length:
        return None
    return kind, body


def record_on_relay(
    relay_chain: core.Chain,
    payload: bytes,
    kind: RecordKind,
    check: Optional[Callable[[bytes], bool]] = None,
    producer: Optional[str] = None,
) -> core.Chain:
    """Embed a verified payload as a relay-chain transaction in the next
    block. The simulator routes records through its mempool instead; this is
    the direct library path."""
    if check is not None and not check(payload):
        raise RejectedPayload(f"{kind.name} payload failed verification")
    tx = make_record_tx(kind, payload)
    return core.append_block(relay_chain, [tx], relay_chain.tip.slot + relay_chain.block_time, producer=producer)
