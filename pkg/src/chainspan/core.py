"""Blockchain data model shared by the relay chain and both parachains.

Everything here is an immutable value: chains grow by producing new Chain
objects, so values can be shared freely between threads or worlds. Blocks
keep their transaction lists Merkle-rooted, with cross-chain transactions
packed into a contiguous left subtree so their inclusion proofs share a
subtree root. Transaction persistence follows the depth-k rule: a
transaction is stable once it sits more than k blocks below the tip.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .encoding import (
    DIGEST_LEN,
    TAG_HEADER,
    TAG_LEAF,
    TAG_NODE,
    TAG_TXID,
    ZERO_DIGEST,
    Reader,
    enc_bytes,
    enc_list,
    enc_str,
    enc_u8,
    enc_u64,
    tagged_hash,
)


class ChainError(Exception):
    """Base for chain-level failures."""


class EmptyBlock(ChainError):
    pass


class NotInBlock(ChainError):
    pass


class BlockTimeViolation(ChainError):
    pass


class ForkDetected(ChainError):
    pass


class TxKind(enum.Enum):
    INTRA_CHAIN = 0
    CROSS_CHAIN = 1


class SyncMode(enum.Enum):
    UITS = 0
    JITS = 1


class ChainId(enum.Enum):
    RELAY = "relay"
    PARA_L = "para_l"
    PARA_R = "para_r"


PARACHAINS = (ChainId.PARA_L, ChainId.PARA_R)


def peer_of(chain_id: ChainId) -> ChainId:
    if chain_id == ChainId.PARA_L:
        return ChainId.PARA_R
    if chain_id == ChainId.PARA_R:
        return ChainId.PARA_L
    raise ValueError("relay chain has no peer parachain")


@dataclass(frozen=True)
class Transaction:
    """A single transaction; cross-chain ones carry exactly one sync label."""

    id: bytes
    kind: TxKind
    sync_mode: Optional[SyncMode]
    payload: bytes
    nonce: int
    signatures: tuple[tuple[str, bytes], ...] = ()

    def __post_init__(self):
        if self.kind == TxKind.CROSS_CHAIN and self.sync_mode is None:
            raise ValueError("cross-chain transaction needs a sync mode label")
        if self.kind == TxKind.INTRA_CHAIN and self.sync_mode is not None:
            raise ValueError("intra-chain transaction must not carry a sync label")
        if len(self.id) != DIGEST_LEN:
            raise ValueError("tx id must be 32 bytes")

    def with_signatures(self, signatures: Sequence[tuple[str, bytes]]) -> "Transaction":
        return Transaction(self.id, self.kind, self.sync_mode, self.payload, self.nonce, tuple(signatures))


def tx_id_of(kind: TxKind, sync_mode: Optional[SyncMode], payload: bytes, nonce: int) -> bytes:
    mode = 255 if sync_mode is None else sync_mode.value
    return tagged_hash(TAG_TXID, enc_u8(kind.value), enc_u8(mode), enc_bytes(payload), enc_u64(nonce))


def make_tx(
    kind: TxKind,
    payload: bytes,
    nonce: int,
    sync_mode: Optional[SyncMode] = None,
    signatures: Sequence[tuple[str, bytes]] = (),
) -> Transaction:
    """Build a transaction with its id derived from content plus nonce.

    Signatures are excluded from the id so cosigning does not change it.
    """
    return Transaction(tx_id_of(kind, sync_mode, payload, nonce), kind, sync_mode, payload, nonce, tuple(signatures))


def encode_tx(tx: Transaction) -> bytes:
    mode = 255 if tx.sync_mode is None else tx.sync_mode.value
    sigs = enc_list(enc_str(party) + enc_bytes(sig) for party, sig in tx.signatures)
    return (
        enc_bytes(tx.id)
        + enc_u8(tx.kind.value)
        + enc_u8(mode)
        + enc_bytes(tx.payload)
        + enc_u64(tx.nonce)
        + sigs
    )


def decode_tx(reader: Reader) -> Transaction:
    txid = reader.bytes_()
    kind = TxKind(reader.u8())
    mode_raw = reader.u8()
    mode = None if mode_raw == 255 else SyncMode(mode_raw)
    payload = reader.bytes_()
    nonce = reader.u64()
    sigs = tuple((reader.str_(), reader.bytes_()) for _ in range(reader.count()))
    return Transaction(txid, kind, mode, payload, nonce, sigs)


# ---------------------------------------------------------------------------
# Merkle tree over transactions
# ---------------------------------------------------------------------------

def _leaf_hash(tx: Transaction) -> bytes:
    return tagged_hash(TAG_LEAF, encode_tx(tx))


def _node_hash(left: bytes, right: bytes) -> bytes:
    return tagged_hash(TAG_NODE, left, right)


def _padded_leaves(txs: Sequence[Transaction]) -> list[bytes]:
    leaves = [_leaf_hash(tx) for tx in txs]
    size = 1
    while size < len(leaves):
        size *= 2
    leaves.extend([leaves[-1]] * (size - len(leaves)))
    return leaves


def merkle_root(txs: Sequence[Transaction]) -> bytes:
    """Root of the order-sensitive tree; leaf count padded to a power of two
    by duplicating the last leaf hash."""
    if not txs:
        raise EmptyBlock("cannot build a Merkle tree over zero transactions")
    level = _padded_leaves(txs)
    while len(level) > 1:
        level = [_node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


@dataclass(frozen=True)
class PathStep:
    sibling_is_left: bool
    digest: bytes


def merkle_prove(block: "Block", tx_id: bytes) -> tuple[PathStep, ...]:
    index = None
    for i, tx in enumerate(block.txs):
        if tx.id == tx_id:
            index = i
            break
    if index is None:
        raise NotInBlock(f"tx {tx_id.hex()[:16]} not in block {block.height}")
    level = _padded_leaves(block.txs)
    path: list[PathStep] = []
    while len(level) > 1:
        sibling = index ^ 1
        path.append(PathStep(sibling_is_left=sibling < index, digest=level[sibling]))
        level = [_node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2)]
        index //= 2
    return tuple(path)


def merkle_verify(root: bytes, tx: Transaction, path: Sequence[PathStep]) -> bool:
    node = _leaf_hash(tx)
    for step in path:
        if step.sibling_is_left:
            node = _node_hash(step.digest, node)
        else:
            node = _node_hash(node, step.digest)
    return node == root


def order_txs_for_block(txs: Sequence[Transaction]) -> tuple[Transaction, ...]:
    """Cross-chain transactions first (stable order), so they occupy a
    contiguous left subtree and their inclusion paths share a subtree root."""
    cross = [tx for tx in txs if tx.kind == TxKind.CROSS_CHAIN]
    intra = [tx for tx in txs if tx.kind == TxKind.INTRA_CHAIN]
    return tuple(cross + intra)


# ---------------------------------------------------------------------------
# Blocks and chains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Block:
    height: int
    parent_hash: bytes
    merkle_root: bytes
    slot: int
    producer: str
    txs: tuple[Transaction, ...]
    block_hash: bytes


def block_hash_of(height: int, parent_hash: bytes, merkle_root_: bytes, slot: int, producer: str) -> bytes:
    return tagged_hash(
        TAG_HEADER,
        enc_u64(height),
        parent_hash,
        merkle_root_,
        enc_u64(slot),
        enc_str(producer),
    )


def make_block(
    height: int,
    parent_hash: bytes,
    slot: int,
    producer: str,
    txs: Sequence[Transaction],
) -> Block:
    """Assemble a block; an empty tx list is allowed (root = zero digest)."""
    ordered = order_txs_for_block(txs)
    root = merkle_root(ordered) if ordered else ZERO_DIGEST
    return Block(
        height=height,
        parent_hash=parent_hash,
        merkle_root=root,
        slot=slot,
        producer=producer,
        txs=ordered,
        block_hash=block_hash_of(height, parent_hash, root, slot, producer),
    )


def encode_block(block: Block) -> bytes:
    return (
        enc_u64(block.height)
        + block.parent_hash
        + block.merkle_root
        + enc_u64(block.slot)
        + enc_str(block.producer)
        + enc_list(encode_tx(tx) for tx in block.txs)
        + block.block_hash
    )


def decode_block(reader: Reader) -> Block:
    height = reader.u64()
    parent = reader.fixed(DIGEST_LEN)
    root = reader.fixed(DIGEST_LEN)
    slot = reader.u64()
    producer = reader.str_()
    txs = tuple(decode_tx(reader) for _ in range(reader.count()))
    block_hash = reader.fixed(DIGEST_LEN)
    return Block(height, parent, root, slot, producer, txs, block_hash)


def encode_blocks(blocks: Sequence[Block]) -> bytes:
    return enc_list(encode_block(b) for b in blocks)


@dataclass(frozen=True)
class PersistenceParam:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("persistence depth k must be >= 1")


@dataclass(frozen=True)
class Chain:
    chain_id: ChainId
    blocks: tuple[Block, ...]
    block_time: int

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return self.tip.height

    def block_at(self, height: int) -> Block:
        return self.blocks[height]


def expected_producer(roster: Sequence[str], height: int) -> str:
    return roster[height % len(roster)]


def genesis(chain_id: ChainId, block_time: int, roster: Sequence[str]) -> Chain:
    if block_time <= 0:
        raise ValueError("block_time must be positive")
    if not roster:
        raise ValueError("roster must not be empty")
    block = make_block(0, ZERO_DIGEST, 0, expected_producer(roster, 0), ())
    return Chain(chain_id=chain_id, blocks=(block,), block_time=block_time)


def append_block(chain: Chain, txs: Sequence[Transaction], slot: int, producer: Optional[str] = None) -> Chain:
    """Extend the chain by one block at the next stable-block-time slot."""
    tip = chain.tip
    if slot <= tip.slot:
        raise BlockTimeViolation(f"slot {slot} not after tip slot {tip.slot}")
    if slot - tip.slot != chain.block_time:
        raise BlockTimeViolation(
            f"slot gap {slot - tip.slot} violates stable block time {chain.block_time}"
        )
    block = make_block(
        height=tip.height + 1,
        parent_hash=tip.block_hash,
        slot=slot,
        producer=producer if producer is not None else tip.producer,
        txs=txs,
    )
    return Chain(chain_id=chain.chain_id, blocks=chain.blocks + (block,), block_time=chain.block_time)


def attach_block(chain: Chain, block: Block) -> Chain:
    """Attach an externally built block; parent mismatches are fork evidence
    and are handed to sim-level fork handling."""
    tip = chain.tip
    if block.parent_hash != tip.block_hash or block.height != tip.height + 1:
        raise ForkDetected(f"block at height {block.height} does not extend tip {tip.height}")
    if block.slot - tip.slot != chain.block_time:
        raise BlockTimeViolation(f"slot gap {block.slot - tip.slot} != {chain.block_time}")
    return Chain(chain_id=chain.chain_id, blocks=chain.blocks + (block,), block_time=chain.block_time)


def find_tx(chain: Chain, tx_id: bytes) -> Optional[tuple[int, int]]:
    """(height, index) of the transaction, or None. Linear scan; hosts that
    need fast lookup keep their own index."""
    for block in chain.blocks:
        for i, tx in enumerate(block.txs):
            if tx.id == tx_id:
                return block.height, i
    return None


def is_stable(chain: Chain, tx_id: bytes, k: PersistenceParam) -> bool:
    """True iff the transaction sits more than k blocks deep (tip depth 0)."""
    found = find_tx(chain, tx_id)
    if found is None:
        return False
    height, _ = found
    return chain.height - height > k.k


def extract_cross_chain_txs(blocks: Iterable[Block]) -> list[Transaction]:
    """All cross-chain transactions in block-then-index order; ordinary
    intra-chain transactions are not extracted."""
    out: list[Transaction] = []
    for block in blocks:
        for tx in block.txs:
            if tx.kind == TxKind.CROSS_CHAIN:
                out.append(tx)
    return out


def validate_chain(chain: Chain, roster: Optional[Sequence[str]] = None) -> None:
    """End-to-end structural validation; raises ChainError on the first defect."""
    blocks = chain.blocks
    if not blocks or blocks[0].height != 0:
        raise ChainError("chain must start at height 0")
    for i, block in enumerate(blocks):
        if block.height != i:
            raise ChainError(f"height discontinuity at index {i}")
        root = merkle_root(block.txs) if block.txs else ZERO_DIGEST
        if root != block.merkle_root:
            raise ChainError(f"merkle root mismatch at height {i}")
        expected_hash = block_hash_of(block.height, block.parent_hash, block.merkle_root, block.slot, block.producer)
        if expected_hash != block.block_hash:
            raise ChainError(f"block hash mismatch at height {i}")
        if roster is not None and block.producer != expected_producer(roster, block.height):
            raise ChainError(f"unexpected producer at height {i}")
        if i > 0:
            if block.parent_hash != blocks[i - 1].block_hash:
                raise ChainError(f"hash link broken at height {i}")
            if block.slot - blocks[i - 1].slot != chain.block_time:
                raise ChainError(f"block time violated at height {i}")
