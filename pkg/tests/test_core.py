import hashlib
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chainspan import core
from chainspan.encoding import Reader, ZERO_DIGEST

from conftest import make_cross, make_intra


ROSTER = [f"para_l:n{i:03d}" for i in range(5)]


def grow(chain, blocks, txs_for=lambda h: ()):
    for _ in range(blocks):
        slot = chain.tip.slot + chain.block_time
        chain = core.append_block(
            chain, txs_for(chain.height + 1), slot,
            producer=core.expected_producer(ROSTER, chain.height + 1),
        )
    return chain


def fresh_chain(block_time=18):
    return core.genesis(core.ChainId.PARA_L, block_time, ROSTER)


# ---------------------------------------------------------------------------
# Merkle root
# ---------------------------------------------------------------------------

def test_single_tx_root_is_leaf_hash():
    tx = make_intra(0)
    # independent: leaf hash = sha256(0x00 || encoded tx)
    expected = hashlib.sha256(b"\x00" + core.encode_tx(tx)).digest()
    assert core.merkle_root([tx]) == expected


def test_merkle_root_is_order_sensitive():
    t1, t2 = make_intra(1), make_intra(2)
    assert core.merkle_root([t1, t2]) != core.merkle_root([t2, t1])


def test_merkle_root_empty_list_rejected():
    with pytest.raises(core.EmptyBlock):
        core.merkle_root([])


def _walk(leaf: bytes, path) -> bytes:
    # independent straight-line hash walk, no reuse of merkle_verify
    node = leaf
    for step in path:
        if step.sibling_is_left:
            node = hashlib.sha256(b"\x01" + step.digest + node).digest()
        else:
            node = hashlib.sha256(b"\x01" + node + step.digest).digest()
    return node


def test_block_of_55_txs_has_depth_6_paths():
    rng = random.Random(7)
    txs = [make_cross(n) if rng.random() < 0.05 else make_intra(n) for n in range(55)]
    block = core.make_block(1, ZERO_DIGEST, 18, ROSTER[1], txs)
    cross = [tx for tx in block.txs if tx.kind == core.TxKind.CROSS_CHAIN]
    assert cross, "workload should have produced some cross-chain txs"
    for tx in cross:
        path = core.merkle_prove(block, tx.id)
        assert len(path) == 6  # ceil(log2(64)) after padding
        leaf = hashlib.sha256(b"\x00" + core.encode_tx(tx)).digest()
        assert _walk(leaf, path) == block.merkle_root


def test_cross_chain_txs_occupy_left_subtree():
    txs = [make_intra(0), make_cross(1), make_intra(2), make_cross(3)]
    block = core.make_block(1, ZERO_DIGEST, 18, ROSTER[1], txs)
    kinds = [tx.kind for tx in block.txs]
    assert kinds == [core.TxKind.CROSS_CHAIN] * 2 + [core.TxKind.INTRA_CHAIN] * 2


# ---------------------------------------------------------------------------
# Merkle proofs
# ---------------------------------------------------------------------------

def test_single_tx_block_has_empty_path():
    tx = make_intra(0)
    block = core.make_block(1, ZERO_DIGEST, 18, ROSTER[1], [tx])
    path = core.merkle_prove(block, tx.id)
    assert path == ()
    assert core.merkle_verify(block.merkle_root, tx, path)


def test_four_tx_block_has_two_step_paths():
    txs = [make_intra(n) for n in range(4)]
    block = core.make_block(1, ZERO_DIGEST, 18, ROSTER[1], txs)
    path = core.merkle_prove(block, txs[2].id)
    assert len(path) == 2
    assert core.merkle_verify(block.merkle_root, txs[2], path)


def test_absent_tx_raises():
    block = core.make_block(1, ZERO_DIGEST, 18, ROSTER[1], [make_intra(0)])
    with pytest.raises(core.NotInBlock):
        core.merkle_prove(block, b"\xaa" * 32)


def test_every_tx_in_random_block_verifies_and_flips_fail():
    rng = random.Random(55)
    txs = [make_cross(n) if rng.random() < 0.2 else make_intra(n) for n in range(55)]
    block = core.make_block(1, ZERO_DIGEST, 18, ROSTER[1], txs)
    for tx in block.txs:
        path = core.merkle_prove(block, tx.id)
        assert core.merkle_verify(block.merkle_root, tx, path)
        # flip one bit in one sibling: proof must die
        step_i = rng.randrange(len(path))
        bad = bytearray(path[step_i].digest)
        bad[rng.randrange(32)] ^= 1 << rng.randrange(8)
        mutated = list(path)
        mutated[step_i] = core.PathStep(path[step_i].sibling_is_left, bytes(bad))
        assert not core.merkle_verify(block.merkle_root, tx, mutated)


# ---------------------------------------------------------------------------
# Chain growth
# ---------------------------------------------------------------------------

def test_append_at_block_time_slot():
    chain = fresh_chain()
    chain = core.append_block(chain, [make_intra(0)], 18, producer=ROSTER[1])
    assert chain.height == 1
    assert chain.tip.parent_hash == chain.blocks[0].block_hash


def test_append_with_wrong_slot_gap():
    chain = fresh_chain()
    with pytest.raises(core.BlockTimeViolation):
        core.append_block(chain, [], 19)
    with pytest.raises(core.BlockTimeViolation):
        core.append_block(chain, [], 36)


def test_100_appends_all_links_verify():
    chain = grow(fresh_chain(), 100, lambda h: (make_intra(h),))
    assert chain.height == 100
    # independent re-walk of the hash links
    for i in range(1, 101):
        blk = chain.blocks[i]
        prev = chain.blocks[i - 1]
        assert blk.parent_hash == prev.block_hash
        assert blk.slot - prev.slot == chain.block_time
    core.validate_chain(chain, ROSTER)


def test_attach_block_fork_detected():
    chain = grow(fresh_chain(), 2)
    stranger = core.make_block(3, b"\x13" * 32, chain.tip.slot + 18, ROSTER[3], ())
    with pytest.raises(core.ForkDetected):
        core.attach_block(chain, stranger)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def test_tip_tx_not_stable_at_k9():
    tx = make_intra(0)
    chain = grow(fresh_chain(), 1, lambda h: (tx,))
    assert not core.is_stable(chain, tx.id, core.PersistenceParam(9))


def test_depth_10_is_stable_at_k9():
    tx = make_intra(0)
    chain = grow(fresh_chain(), 1, lambda h: (tx,))
    chain = grow(chain, 10)
    assert core.is_stable(chain, tx.id, core.PersistenceParam(9))


def test_depth_sweep_against_direct_count():
    tx = make_intra(0)
    chain = grow(fresh_chain(), 1, lambda h: (tx,))
    for depth in range(0, 21):
        # direct depth count is the oracle: tx at height 1, tip at 1 + depth
        assert core.is_stable(chain, tx.id, core.PersistenceParam(9)) == (depth > 9)
        chain = grow(chain, 1)


def test_absent_tx_is_never_stable():
    chain = grow(fresh_chain(), 12)
    assert not core.is_stable(chain, b"\x77" * 32, core.PersistenceParam(9))


@given(st.integers(min_value=0, max_value=30))
@settings(max_examples=20, deadline=None)
def test_persistence_is_monotone_under_growth(extra):
    tx = make_intra(0)
    chain = grow(fresh_chain(), 1, lambda h: (tx,))
    chain = grow(chain, 10)  # now stable at k=9
    k = core.PersistenceParam(9)
    assert core.is_stable(chain, tx.id, k)
    chain = grow(chain, extra)
    assert core.is_stable(chain, tx.id, k)


# ---------------------------------------------------------------------------
# Cross-chain extraction
# ---------------------------------------------------------------------------

def test_extract_none():
    chain = grow(fresh_chain(), 3, lambda h: (make_intra(h),))
    assert core.extract_cross_chain_txs(chain.blocks) == []


def test_extract_single_cross():
    cross = make_cross(10)
    block = core.make_block(1, ZERO_DIGEST, 18, ROSTER[1], [make_intra(0), cross, make_intra(1)])
    assert core.extract_cross_chain_txs([block]) == [cross]


def test_extract_matches_independent_scan():
    rng = random.Random(3)
    nonce = 0
    blocks = []
    chain = fresh_chain()
    for _ in range(10):
        txs = []
        for _ in range(55):
            if rng.random() < 0.05:
                txs.append(make_cross(nonce))
            else:
                txs.append(make_intra(nonce))
            nonce += 1
        chain = core.append_block(chain, txs, chain.tip.slot + 18,
                                  producer=core.expected_producer(ROSTER, chain.height + 1))
        blocks.append(chain.tip)
    got = core.extract_cross_chain_txs(blocks)
    want = [tx for b in blocks for tx in b.txs if tx.kind == core.TxKind.CROSS_CHAIN]
    assert got == want
    assert 0 < len(got) < 55


# ---------------------------------------------------------------------------
# Canonical encoding round-trips
# ---------------------------------------------------------------------------

def test_tx_roundtrip():
    tx = make_cross(9, payload=b"hello", mode=core.SyncMode.JITS).with_signatures([("alice", b"\x01" * 64)])
    back = core.decode_tx(Reader(core.encode_tx(tx)))
    assert back == tx


def test_block_roundtrip():
    block = core.make_block(4, b"\x05" * 32, 72, ROSTER[4], [make_intra(0), make_cross(1)])
    reader = Reader(core.encode_block(block))
    back = core.decode_block(reader)
    reader.expect_done()
    assert back == block


@given(st.binary(min_size=0, max_size=40), st.integers(min_value=0, max_value=2**60))
@settings(max_examples=50, deadline=None)
def test_tx_id_is_deterministic_and_nonce_sensitive(payload, nonce):
    a = core.make_tx(core.TxKind.INTRA_CHAIN, payload, nonce)
    b = core.make_tx(core.TxKind.INTRA_CHAIN, payload, nonce)
    c = core.make_tx(core.TxKind.INTRA_CHAIN, payload, nonce + 1)
    assert a.id == b.id
    assert a.id != c.id


def test_sync_label_rules():
    with pytest.raises(ValueError):
        core.Transaction(b"\x00" * 32, core.TxKind.CROSS_CHAIN, None, b"", 0)
    with pytest.raises(ValueError):
        core.Transaction(b"\x00" * 32, core.TxKind.INTRA_CHAIN, core.SyncMode.UITS, b"", 0)
