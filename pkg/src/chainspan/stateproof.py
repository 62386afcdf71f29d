"""Batch transaction proofs: per-round statements folded into a recursive,
quorum-attested proof chain.

A real deployment would wrap the round witness in a recursive SNARK. Here the
proof object is a statement chain attested by a quorum of relay-group
signatures, which preserves the protocol-level contract the rest of the stack
relies on: constant encoded size, hash-linked recursion, and verification
that needs no parachain blocks. The full witness checks (block format, hash
pointers, Merkle inclusion of every cross-chain transaction, accumulator
transition) run on the prover side in `check_round_witness`; a native
recompute oracle (`recheck_history`) replays them over full block data and is
what tests and counterfeit detection use in place of SNARK soundness.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey

from . import accumulator as acc
from . import core
from .encoding import (
    DIGEST_LEN,
    TAG_KEY,
    TAG_PROOF,
    TAG_STATEMENT,
    ZERO_DIGEST,
    Reader,
    enc_bytes,
    enc_list,
    enc_str,
    enc_u64,
    sha256,
    tagged_hash,
)


class ProofError(Exception):
    pass


class WitnessCheckFailed(ProofError):
    def __init__(self, reason: str, height: Optional[int] = None):
        super().__init__(reason if height is None else f"{reason} (block height {height})")
        self.reason = reason
        self.height = height


class FormatInvalid(WitnessCheckFailed):
    pass


class HashLinkBroken(WitnessCheckFailed):
    pass


class MerkleInclusionFailed(WitnessCheckFailed):
    pass


class AccumulatorMismatch(WitnessCheckFailed):
    pass


class RoundGap(ProofError):
    pass


class DigestChainBroken(ProofError):
    pass


class InsufficientQuorum(ProofError):
    pass


class OracleReject(ProofError):
    """Raised by the native recompute oracle on the first inconsistency."""


# ---------------------------------------------------------------------------
# Identities
# ---------------------------------------------------------------------------

def node_secret(seed: bytes, node_id: str) -> bytes:
    return tagged_hash(TAG_KEY, enc_bytes(seed), enc_str(node_id))


def derive_keyring(seed: bytes, node_ids: Sequence[str]) -> dict[str, Ed25519PrivateKey]:
    return {nid: Ed25519PrivateKey.from_private_bytes(node_secret(seed, nid)) for nid in node_ids}


def public_identities(keyring: Mapping[str, Ed25519PrivateKey]) -> tuple[tuple[str, bytes], ...]:
    out = []
    for nid in sorted(keyring):
        raw = keyring[nid].public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )
        out.append((nid, raw))
    return tuple(out)


def required_quorum(group_size: int) -> int:
    """floor(2n/3) + 1, matching the alpha < 1/3 corruption bound."""
    return (2 * group_size) // 3 + 1


@dataclass(frozen=True)
class ProofParams:
    """Public statement shared by everyone on the platform: protocol
    descriptors (rosters, block time) and node identities, plus the opaque
    setup string and accumulator parameters."""

    crs: bytes
    acc: acc.AccParams
    rosters: tuple[tuple[str, tuple[str, ...]], ...]
    identities: tuple[tuple[str, bytes], ...]
    group_size: int
    quorum: int
    block_time: int

    def roster(self, chain_value: str) -> tuple[str, ...]:
        for name, members in self.rosters:
            if name == chain_value:
                return members
        raise KeyError(f"no roster registered for chain {chain_value!r}")

    def pubkey(self, node_id: str) -> Optional[bytes]:
        for nid, raw in self.identities:
            if nid == node_id:
                return raw
        return None


def build_proof_params(
    seed: bytes,
    acc_params: acc.AccParams,
    rosters: Mapping[str, Sequence[str]],
    keyring: Mapping[str, Ed25519PrivateKey],
    group_size: int,
    block_time: int,
) -> ProofParams:
    return ProofParams(
        crs=tagged_hash(TAG_KEY, enc_bytes(seed), b"crs"),
        acc=acc_params,
        rosters=tuple((name, tuple(members)) for name, members in sorted(rosters.items())),
        identities=public_identities(keyring),
        group_size=group_size,
        quorum=required_quorum(group_size),
        block_time=block_time,
    )


# ---------------------------------------------------------------------------
# Statements and proofs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RoundStatement:
    round: int
    prev_digest: acc.AccumulatorDigest
    new_digest: acc.AccumulatorDigest
    block_range: tuple[int, int]  # (first, last); empty round encodes (h, h-1)
    blocks_hash: bytes


@dataclass(frozen=True)
class StateProof:
    round: int
    statement: RoundStatement
    prev_link: bytes
    attestations: tuple[tuple[str, bytes], ...]
    quorum: int


@dataclass
class CostCounter:
    """Block-check work units; one unit per block validated."""

    units: int = 0


def encode_statement(pp: ProofParams, stmt: RoundStatement) -> bytes:
    return (
        enc_u64(stmt.round)
        + acc.encode_digest(pp.acc, stmt.prev_digest)
        + acc.encode_digest(pp.acc, stmt.new_digest)
        + enc_u64(stmt.block_range[0])
        + enc_u64(stmt.block_range[1] + 1)  # +1 keeps empty ranges unsigned
        + stmt.blocks_hash
    )


def decode_statement(pp: ProofParams, reader: Reader) -> RoundStatement:
    rnd = reader.u64()
    prev = acc.decode_digest(pp.acc, reader)
    new = acc.decode_digest(pp.acc, reader)
    first = reader.u64()
    last = reader.u64() - 1
    blocks_hash = reader.fixed(DIGEST_LEN)
    return RoundStatement(rnd, prev, new, (first, last), blocks_hash)


def statement_digest(pp: ProofParams, stmt: RoundStatement) -> bytes:
    return tagged_hash(TAG_STATEMENT, encode_statement(pp, stmt))


def encode_proof(pp: ProofParams, proof: StateProof) -> bytes:
    return (
        enc_u64(proof.round)
        + encode_statement(pp, proof.statement)
        + proof.prev_link
        + enc_list(enc_str(nid) + enc_bytes(sig) for nid, sig in proof.attestations)
        + enc_u64(proof.quorum)
    )


def decode_proof(pp: ProofParams, reader: Reader) -> StateProof:
    rnd = reader.u64()
    stmt = decode_statement(pp, reader)
    prev_link = reader.fixed(DIGEST_LEN)
    attestations = tuple((reader.str_(), reader.bytes_()) for _ in range(reader.count()))
    quorum = reader.u64()
    return StateProof(rnd, stmt, prev_link, attestations, quorum)


def proof_digest(pp: ProofParams, proof: StateProof) -> bytes:
    return tagged_hash(TAG_PROOF, encode_proof(pp, proof))


def _attested_message(pp: ProofParams, stmt: RoundStatement, prev_link: bytes) -> bytes:
    return tagged_hash(TAG_STATEMENT, encode_statement(pp, stmt), prev_link)


def attest(
    pp: ProofParams,
    stmt: RoundStatement,
    prev_link: bytes,
    group: Sequence[str],
    keyring: Mapping[str, Ed25519PrivateKey],
    signers: Optional[Sequence[str]] = None,
) -> StateProof:
    """Assemble a proof from group signatures over (statement || prev_link)."""
    message = _attested_message(pp, stmt, prev_link)
    signing = list(group) if signers is None else [n for n in group if n in set(signers)]
    attestations = tuple((nid, keyring[nid].sign(message)) for nid in signing)
    if len(attestations) < pp.quorum:
        raise InsufficientQuorum(f"{len(attestations)} signatures < quorum {pp.quorum}")
    return StateProof(
        round=stmt.round,
        statement=stmt,
        prev_link=prev_link,
        attestations=attestations,
        quorum=pp.quorum,
    )


# ---------------------------------------------------------------------------
# Round witness checking (the prover-side circuit stand-in)
# ---------------------------------------------------------------------------

def _roster_for_producer(pp: ProofParams, producer: str) -> tuple[str, ...]:
    chain_value = producer.split(":", 1)[0]
    return pp.roster(chain_value)


def check_round_witness(
    pp: ProofParams,
    prev: acc.AccumulatorDigest,
    next_digest: acc.AccumulatorDigest,
    blocks: Sequence[core.Block],
    round_index: int,
    cost: Optional[CostCounter] = None,
) -> RoundStatement:
    """Validate one round's new blocks and the accumulator transition.

    Enforces: block format and producer validity, hash pointers between the
    round's blocks, Merkle inclusion of every cross-chain transaction, and
    that exactly the extracted cross-chain transactions take `prev` to
    `next_digest`. Touches only the given blocks; work is |blocks| units.
    """
    if not blocks:
        raise ValueError("empty rounds have no witness; use empty_round_statement")
    roster = _roster_for_producer(pp, blocks[0].producer)
    for i, block in enumerate(blocks):
        if cost is not None:
            cost.units += 1
        root = core.merkle_root(block.txs) if block.txs else ZERO_DIGEST
        if root != block.merkle_root:
            raise FormatInvalid("merkle root mismatch", block.height)
        recomputed = core.block_hash_of(block.height, block.parent_hash, block.merkle_root, block.slot, block.producer)
        if recomputed != block.block_hash:
            raise FormatInvalid("block hash mismatch", block.height)
        if block.producer != core.expected_producer(roster, block.height):
            raise FormatInvalid("unexpected producer", block.height)
        if i > 0:
            prev_block = blocks[i - 1]
            if block.height != prev_block.height + 1:
                raise FormatInvalid("height discontinuity", block.height)
            if block.parent_hash != prev_block.block_hash:
                raise HashLinkBroken("hash pointer does not match previous block", block.height)
            if block.slot - prev_block.slot != pp.block_time:
                raise FormatInvalid("stable block time violated", block.height)
        for tx in block.txs:
            if tx.kind != core.TxKind.CROSS_CHAIN:
                continue
            path = core.merkle_prove(block, tx.id)
            if not core.merkle_verify(block.merkle_root, tx, path):
                raise MerkleInclusionFailed("cross-chain tx inclusion proof failed", block.height)
    extracted = core.extract_cross_chain_txs(blocks)
    folded = acc.add(pp.acc, prev, [tx.id for tx in extracted])
    if folded != next_digest:
        raise AccumulatorMismatch("accumulator transition mismatch", blocks[0].height)
    return RoundStatement(
        round=round_index,
        prev_digest=prev,
        new_digest=next_digest,
        block_range=(blocks[0].height, blocks[-1].height),
        blocks_hash=sha256(core.encode_blocks(blocks)),
    )


def empty_round_statement(round_index: int, digest: acc.AccumulatorDigest, next_height: int) -> RoundStatement:
    """Identity statement for a round that pulled no new blocks."""
    return RoundStatement(
        round=round_index,
        prev_digest=digest,
        new_digest=digest,
        block_range=(next_height, next_height - 1),
        blocks_hash=sha256(core.encode_blocks([])),
    )


# ---------------------------------------------------------------------------
# Proving
# ---------------------------------------------------------------------------

def prove_genesis(
    pp: ProofParams,
    chain: core.Chain,
    group: Sequence[str],
    keyring: Mapping[str, Ed25519PrivateKey],
    cost: Optional[CostCounter] = None,
) -> StateProof:
    """Round-0 proof over the whole initial chain; the initial accumulator is
    the bare generator (pre-platform cross-chain txs are not synchronized)."""
    try:
        core.validate_chain(chain, pp.roster(chain.chain_id.value))
    except core.ChainError as exc:
        raise WitnessCheckFailed(f"invalid chain: {exc}") from exc
    if cost is not None:
        cost.units += len(chain.blocks)
    initial = acc.empty_digest(pp.acc)
    stmt = RoundStatement(
        round=0,
        prev_digest=initial,
        new_digest=initial,
        block_range=(0, chain.height),
        blocks_hash=sha256(core.encode_blocks(chain.blocks)),
    )
    return attest(pp, stmt, ZERO_DIGEST, group, keyring)


def prove_round(
    pp: ProofParams,
    prev_proof: StateProof,
    statement: RoundStatement,
    group: Sequence[str],
    keyring: Mapping[str, Ed25519PrivateKey],
    signers: Optional[Sequence[str]] = None,
) -> StateProof:
    """Fold a checked round statement into the proof chain. Only the new
    round's work is consumed; old blocks are covered by the previous proof."""
    if statement.round != prev_proof.round + 1:
        raise RoundGap(f"statement round {statement.round} after proof round {prev_proof.round}")
    if statement.block_range[0] != prev_proof.statement.block_range[1] + 1:
        raise RoundGap(
            f"block range {statement.block_range} not adjacent to {prev_proof.statement.block_range}"
        )
    if statement.prev_digest != prev_proof.statement.new_digest:
        raise DigestChainBroken("statement does not start from the previous digest")
    if statement.new_digest.element_count < statement.prev_digest.element_count:
        raise DigestChainBroken("element count decreased")
    return attest(pp, statement, proof_digest(pp, prev_proof), group, keyring, signers=signers)


def verify_state_proof(pp: ProofParams, proof: StateProof, prev_proof_digest: bytes) -> bool:
    """Stateless verification: quorum of registered signatures over the
    statement plus a matching recursion link. Consumes no block data."""
    if proof.prev_link != prev_proof_digest:
        return False
    if proof.quorum < pp.quorum:
        return False
    if proof.round != proof.statement.round:
        return False
    stmt = proof.statement
    if stmt.new_digest.element_count < stmt.prev_digest.element_count:
        return False
    if stmt.block_range[1] + 1 < stmt.block_range[0]:
        return False
    message = _attested_message(pp, stmt, proof.prev_link)
    valid = set()
    for nid, sig in proof.attestations:
        if nid in valid:
            continue
        raw = pp.pubkey(nid)
        if raw is None:
            continue
        try:
            Ed25519PublicKey.from_public_bytes(raw).verify(sig, message)
        except InvalidSignature:
            continue
        valid.add(nid)
    return len(valid) >= pp.quorum


# ---------------------------------------------------------------------------
# Native recompute oracle (tests and counterfeit detection only)
# ---------------------------------------------------------------------------

def recheck_history(
    pp: ProofParams,
    proofs: Sequence[StateProof],
    genesis_chain: core.Chain,
    blocks_by_round: Sequence[Sequence[core.Block]],
) -> None:
    """Replay every round natively over full block data; raises OracleReject
    on the first inconsistency.

    `proofs[0]` must be the genesis proof over `genesis_chain`;
    `blocks_by_round[i]` holds the blocks behind `proofs[i + 1]`.
    """
    if not proofs:
        raise OracleReject("empty proof chain")
    if len(blocks_by_round) != len(proofs) - 1:
        raise OracleReject("block data does not cover the proof chain")
    try:
        core.validate_chain(genesis_chain, pp.roster(genesis_chain.chain_id.value))
    except core.ChainError as exc:
        raise OracleReject(f"genesis chain invalid: {exc}") from exc
    head = proofs[0]
    if head.prev_link != ZERO_DIGEST:
        raise OracleReject("genesis proof must link to the zero digest")
    initial = acc.empty_digest(pp.acc)
    expected = RoundStatement(
        round=0,
        prev_digest=initial,
        new_digest=initial,
        block_range=(0, genesis_chain.height),
        blocks_hash=sha256(core.encode_blocks(genesis_chain.blocks)),
    )
    if head.statement != expected or head.round != 0:
        raise OracleReject("genesis statement does not match recomputation")

    digest = initial
    last_block = genesis_chain.tip
    for i, blocks in enumerate(blocks_by_round):
        proof = proofs[i + 1]
        prev_proof = proofs[i]
        if proof.prev_link != proof_digest(pp, prev_proof):
            raise OracleReject(f"recursion link broken at round {i + 1}")
        if proof.round != prev_proof.round + 1 or proof.statement.round != proof.round:
            raise OracleReject(f"round numbering broken at round {i + 1}")
        if blocks:
            if blocks[0].parent_hash != last_block.block_hash:
                raise OracleReject(f"round {i + 1} does not extend the previous tip")
            if blocks[0].height != last_block.height + 1:
                raise OracleReject(f"round {i + 1} heights not adjacent")
            try:
                recomputed = check_round_witness(
                    pp, digest, proof.statement.new_digest, blocks, round_index=proof.round
                )
            except WitnessCheckFailed as exc:
                raise OracleReject(f"round {i + 1} witness check failed: {exc}") from exc
            last_block = blocks[-1]
        else:
            recomputed = empty_round_statement(proof.round, digest, last_block.height + 1)
        if recomputed != proof.statement:
            raise OracleReject(f"round {i + 1} statement does not match recomputation")
        digest = recomputed.new_digest


def history_is_sound(
    pp: ProofParams,
    proofs: Sequence[StateProof],
    genesis_chain: core.Chain,
    blocks_by_round: Sequence[Sequence[core.Block]],
) -> bool:
    try:
        recheck_history(pp, proofs, genesis_chain, blocks_by_round)
    except OracleReject:
        return False
    return True


# ---------------------------------------------------------------------------
# Params wire format (for the CLI verify path)
# ---------------------------------------------------------------------------

PARAMS_MAGIC = b"CSPP1\n"
PROOFCHAIN_MAGIC = b"CSPC1\n"


def encode_proof_params(pp: ProofParams) -> bytes:
    body = (
        enc_bytes(pp.crs)
        + acc.encode_params(pp.acc)
        + enc_list(
            enc_str(name) + enc_list(enc_str(m) for m in members) for name, members in pp.rosters
        )
        + enc_list(enc_str(nid) + enc_bytes(raw) for nid, raw in pp.identities)
        + enc_u64(pp.group_size)
        + enc_u64(pp.quorum)
        + enc_u64(pp.block_time)
    )
    return PARAMS_MAGIC + body


def decode_proof_params(data: bytes) -> ProofParams:
    if not data.startswith(PARAMS_MAGIC):
        raise ValueError("not a params file")
    reader = Reader(data[len(PARAMS_MAGIC):])
    crs = reader.bytes_()
    acc_params = acc.decode_params(reader)
    rosters = tuple(
        (reader.str_(), tuple(reader.str_() for _ in range(reader.count())))
        for _ in range(reader.count())
    )
    identities = tuple((reader.str_(), reader.bytes_()) for _ in range(reader.count()))
    group_size = reader.u64()
    quorum = reader.u64()
    block_time = reader.u64()
    reader.expect_done()
    return ProofParams(crs, acc_params, rosters, identities, group_size, quorum, block_time)


def encode_proof_chain(pp: ProofParams, proofs: Sequence[StateProof]) -> bytes:
    return PROOFCHAIN_MAGIC + enc_list(enc_bytes(encode_proof(pp, p)) for p in proofs)


def decode_proof_chain(pp: ProofParams, data: bytes) -> list[StateProof]:
    if not data.startswith(PROOFCHAIN_MAGIC):
        raise ValueError("not a proof chain file")
    reader = Reader(data[len(PROOFCHAIN_MAGIC):])
    proofs = []
    for _ in range(reader.count()):
        sub = Reader(reader.bytes_())
        proofs.append(decode_proof(pp, sub))
        sub.expect_done()
    reader.expect_done()
    return proofs


def verify_proof_chain(pp: ProofParams, proofs: Sequence[StateProof]) -> bool:
    """Walk a proof chain from genesis, verifying each round against the
    digest of its predecessor."""
    if not proofs:
        return False
    prev_digest = ZERO_DIGEST
    for i, proof in enumerate(proofs):
        if not verify_state_proof(pp, proof, prev_digest):
            return False
        if proof.round != proofs[0].round + i:
            return False
        prev_digest = proof_digest(pp, proof)
    return True


def rebind_round(stmt: RoundStatement, round_index: int) -> RoundStatement:
    return replace(stmt, round=round_index)
