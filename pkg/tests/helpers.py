"""Shared builders: a lean honest-history generator used by proof tests,
independent of the simulator (so proof-chain checks do not lean on the code
they are meant to cross-check)."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from chainspan import accumulator as acc
from chainspan import core, stateproof as sp


RELAY_ROSTER = tuple(f"relay:n{i:03d}" for i in range(8))
PARA_L_ROSTER = tuple(f"para_l:n{i:03d}" for i in range(4))
PARA_R_ROSTER = tuple(f"para_r:n{i:03d}" for i in range(4))
GROUP = RELAY_ROSTER[:4]


@dataclass
class History:
    pp: sp.ProofParams
    keyring: dict
    genesis_chain: core.Chain
    chain: core.Chain
    proofs: list[sp.StateProof]
    blocks_by_round: list[list[core.Block]]
    costs: list[int] = field(default_factory=list)


def make_pp(acc_params, seed=b"\x33" * 32, group_size=4, block_time=18):
    keyring = sp.derive_keyring(seed, RELAY_ROSTER + PARA_L_ROSTER + PARA_R_ROSTER)
    pp = sp.build_proof_params(
        seed,
        acc_params,
        {
            core.ChainId.RELAY.value: RELAY_ROSTER,
            core.ChainId.PARA_L.value: PARA_L_ROSTER,
            core.ChainId.PARA_R.value: PARA_R_ROSTER,
        },
        keyring,
        group_size=group_size,
        block_time=block_time,
    )
    return pp, keyring


def grow_round(chain, blocks, cross_per_block, rng, nonce_base):
    """Append `blocks` blocks, each with one intra tx and `cross_per_block`
    cross-chain txs; returns (chain, new blocks)."""
    new_blocks = []
    nonce = nonce_base
    for _ in range(blocks):
        txs = [core.make_tx(core.TxKind.INTRA_CHAIN, b"pay", nonce)]
        nonce += 1
        for _ in range(cross_per_block):
            txs.append(
                core.make_tx(core.TxKind.CROSS_CHAIN, rng.randbytes(8), nonce, sync_mode=core.SyncMode.UITS)
            )
            nonce += 1
        chain = core.append_block(
            chain, txs, chain.tip.slot + chain.block_time,
            producer=core.expected_producer(PARA_L_ROSTER, chain.height + 1),
        )
        new_blocks.append(chain.tip)
    return chain, new_blocks, nonce


def build_history(acc_params, rounds=5, blocks_per_round=3, cross_per_block=1, seed=0,
                  genesis_blocks=0) -> History:
    pp, keyring = make_pp(acc_params)
    rng = random.Random(seed)
    chain = core.genesis(core.ChainId.PARA_L, 18, PARA_L_ROSTER)
    nonce = 0
    for _ in range(genesis_blocks):
        chain, _, nonce = grow_round(chain, 1, cross_per_block, rng, nonce)
    genesis_chain = chain
    cost0 = sp.CostCounter()
    proofs = [sp.prove_genesis(pp, chain, GROUP, keyring, cost=cost0)]
    hist = History(pp, keyring, genesis_chain, chain, proofs, [], [cost0.units])
    digest = acc.empty_digest(acc_params)
    for u in range(1, rounds + 1):
        chain, new_blocks, nonce = grow_round(chain, blocks_per_round, cross_per_block, rng, nonce)
        extracted = core.extract_cross_chain_txs(new_blocks)
        next_digest = acc.add(acc_params, digest, [tx.id for tx in extracted])
        cost = sp.CostCounter()
        stmt = sp.check_round_witness(pp, digest, next_digest, new_blocks, round_index=u, cost=cost)
        proofs.append(sp.prove_round(pp, proofs[-1], stmt, GROUP, keyring))
        hist.blocks_by_round.append(new_blocks)
        hist.costs.append(cost.units)
        digest = next_digest
    hist.chain = chain
    return hist
