"""Cross-chain state channel artifacts and per-chain validation rules.

A channel lives between one user on each parachain. Opening and joint
closing ride on jointly initiated sync (both signatures, no relay payload);
unilateral closing publishes the latest dual-signed update, waits out the
dispute window, then confirms; disputing publishes the punishment
transaction for a stale update and awards the whole channel to the monitor.

Updates are purely off-chain: each step exchanges signatures over the next
channel state and over the punishment transaction that invalidates the
previous one. Because a stale update can be published by either side, every
update step drafts one punishment variant per potential beneficiary; each
party keeps the variant that favors them.

`ChannelBook` is the per-chain rule engine: each parachain applies the same
deterministic checks (unique ids, open-mode rule, second-close conflicts,
confirm timing, punish windows), which is what makes conspiracy and replay
attempts fail on both chains.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey

from . import core
from .encoding import (
    TAG_CHANNEL,
    Reader,
    enc_bytes,
    enc_str,
    enc_u64,
    enc_u8,
    tagged_hash,
)


class ChannelError(Exception):
    pass


class InvalidStateTransition(ChannelError):
    pass


class UpdateIncomplete(ChannelError):
    pass


class RejectedOpenMode(ChannelError):
    pass


class InsufficientFunds(ChannelError):
    pass


class RejectedEarlyConfirm(ChannelError):
    pass


class DisputeWindowMissed(ChannelError):
    pass


class NoSuchStalePunish(ChannelError):
    pass


class ChannelTxKind(enum.Enum):
    OPEN = 0
    UPDATE = 1
    PUNISH = 2
    CLOSE = 3
    CONFIRM_CLOSE = 4


class ChannelStatus(enum.Enum):
    OPEN = "open"
    CLOSING_UNILATERAL = "closing_unilateral"
    CLOSED = "closed"
    PUNISH_CLOSED = "punish_closed"


@dataclass(frozen=True)
class DisputeWindow:
    delta_t: int  # ticks

    def __post_init__(self):
        if self.delta_t <= 0:
            raise ValueError("dispute window must be positive")


@dataclass(frozen=True)
class ChannelTxBody:
    """The signed content of every channel operation transaction."""

    kind: ChannelTxKind
    channel_id: bytes
    seq: int
    balances: tuple[int, int]  # (alice, bob)
    alice: str
    bob: str
    beneficiary: Optional[str] = None  # punish transactions only
    nonce: int = 0


def channel_id_of(alice: str, bob: str, deposits: tuple[int, int], nonce: int) -> bytes:
    return tagged_hash(
        TAG_CHANNEL, enc_str(alice), enc_str(bob), enc_u64(deposits[0]), enc_u64(deposits[1]), enc_u64(nonce)
    )


def encode_body(body: ChannelTxBody) -> bytes:
    return (
        enc_u8(body.kind.value)
        + enc_bytes(body.channel_id)
        + enc_u64(body.seq)
        + enc_u64(body.balances[0])
        + enc_u64(body.balances[1])
        + enc_str(body.alice)
        + enc_str(body.bob)
        + enc_str(body.beneficiary or "")
        + enc_u64(body.nonce)
    )


def decode_body(payload: bytes) -> ChannelTxBody:
    reader = Reader(payload)
    kind = ChannelTxKind(reader.u8())
    channel_id = reader.bytes_()
    seq = reader.u64()
    balances = (reader.u64(), reader.u64())
    alice = reader.str_()
    bob = reader.str_()
    beneficiary = reader.str_() or None
    nonce = reader.u64()
    reader.expect_done()
    return ChannelTxBody(kind, channel_id, seq, balances, alice, bob, beneficiary, nonce)


def body_digest(body: ChannelTxBody) -> bytes:
    return tagged_hash(TAG_CHANNEL, encode_body(body))


def sign_body(body: ChannelTxBody, key: Ed25519PrivateKey) -> bytes:
    return key.sign(body_digest(body))


def signature_valid(body: ChannelTxBody, party_pub: bytes, sig: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(party_pub).verify(sig, body_digest(body))
    except InvalidSignature:
        return False
    return True


def cosign(body: ChannelTxBody, keys: Mapping[str, Ed25519PrivateKey]) -> tuple[tuple[str, bytes], ...]:
    return tuple((party, sign_body(body, keys[party])) for party in (body.alice, body.bob))


def channel_tx(body: ChannelTxBody, sync_mode: core.SyncMode, signatures) -> core.Transaction:
    return core.make_tx(
        core.TxKind.CROSS_CHAIN, encode_body(body), body.nonce, sync_mode=sync_mode, signatures=tuple(signatures)
    )


# ---------------------------------------------------------------------------
# Drafting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelState:
    channel_id: bytes
    alice: str
    bob: str
    seq: int
    balances: tuple[int, int]
    total: int


def draft_open(alice: str, bob: str, deposits: tuple[int, int], nonce: int) -> ChannelTxBody:
    if deposits[0] < 0 or deposits[1] < 0 or deposits[0] + deposits[1] <= 0:
        raise InvalidStateTransition("deposits must be non-negative with positive total")
    cid = channel_id_of(alice, bob, deposits, nonce)
    return ChannelTxBody(ChannelTxKind.OPEN, cid, 0, deposits, alice, bob, nonce=nonce)


@dataclass(frozen=True)
class UpdateArtifacts:
    update: ChannelTxBody
    punish_for_alice: Optional[ChannelTxBody]
    punish_for_bob: Optional[ChannelTxBody]


def draft_update(state: ChannelState, new_balances: tuple[int, int], nonce: int) -> UpdateArtifacts:
    """Next update plus the punishment transactions invalidating the previous
    state (one variant per potential beneficiary). Nothing touches a chain."""
    if new_balances[0] < 0 or new_balances[1] < 0:
        raise InvalidStateTransition("balances must be non-negative")
    if new_balances[0] + new_balances[1] != state.total:
        raise InvalidStateTransition(
            f"balances {new_balances} do not conserve channel total {state.total}"
        )
    m = state.seq + 1
    update = ChannelTxBody(ChannelTxKind.UPDATE, state.channel_id, m, new_balances,
                           state.alice, state.bob, nonce=nonce)
    prev = state.seq
    punish_a = ChannelTxBody(ChannelTxKind.PUNISH, state.channel_id, prev, (state.total, 0),
                             state.alice, state.bob, beneficiary=state.alice, nonce=nonce + 1)
    punish_b = ChannelTxBody(ChannelTxKind.PUNISH, state.channel_id, prev, (0, state.total),
                             state.alice, state.bob, beneficiary=state.bob, nonce=nonce + 2)
    return UpdateArtifacts(update, punish_a, punish_b)


def draft_close(state: ChannelState, nonce: int) -> ChannelTxBody:
    return ChannelTxBody(ChannelTxKind.CLOSE, state.channel_id, state.seq, state.balances,
                         state.alice, state.bob, nonce=nonce)


def draft_confirm(update: ChannelTxBody, nonce: int) -> ChannelTxBody:
    return ChannelTxBody(ChannelTxKind.CONFIRM_CLOSE, update.channel_id, update.seq, update.balances,
                         update.alice, update.bob, nonce=nonce)


# ---------------------------------------------------------------------------
# Per-chain rule engine
# ---------------------------------------------------------------------------

@dataclass
class PendingClose:
    close_id: bytes
    kind: ChannelTxKind
    seq: int
    balances: tuple[int, int]
    closer: Optional[str]
    sync_key: tuple[int, int]  # order in which the close hit the relay chain
    recorded_tick: int
    waiting_since: Optional[int] = None  # set once the close sync is stable


@dataclass
class BookEntry:
    body: ChannelTxBody
    status: ChannelStatus = ChannelStatus.OPEN
    opened: bool = False
    pending: Optional[PendingClose] = None
    voided_closes: set = field(default_factory=set)
    beneficiary: Optional[str] = None
    credited: Optional[tuple[int, int]] = None

    @property
    def total(self) -> int:
        return self.body.balances[0] + self.body.balances[1]


@dataclass
class Rejection:
    reason: str
    detail: str = ""


NO_SYNC_KEY = (2**62, 2**62)


class ChannelBook:
    """Channel rules as one parachain's validators apply them.

    Both parachains run identical books; any transaction refused here is
    refused by that chain regardless of which direction it arrived from.
    """

    def __init__(self, party_pubs: Mapping[str, bytes], delta_t: int):
        self.party_pubs = dict(party_pubs)
        self.delta_t = delta_t
        self.channels: dict[bytes, BookEntry] = {}

    # -- helpers ------------------------------------------------------------

    def _sigs_ok(self, body: ChannelTxBody, tx: core.Transaction, parties) -> bool:
        have = dict(tx.signatures)
        for party in parties:
            pub = self.party_pubs.get(party)
            sig = have.get(party)
            if pub is None or sig is None or not signature_valid(body, pub, sig):
                return False
        return True

    # -- validation ---------------------------------------------------------

    def validate(
        self,
        tx: core.Transaction,
        now: int,
        sync_key: tuple[int, int] = NO_SYNC_KEY,
        submitter: Optional[str] = None,
    ) -> Optional[Rejection]:
        """None if the transaction is acceptable on this chain right now,
        otherwise a machine-readable rejection."""
        try:
            body = decode_body(tx.payload)
        except (ValueError, KeyError):
            return Rejection("MalformedChannelTx")
        entry = self.channels.get(body.channel_id)

        if body.kind == ChannelTxKind.OPEN:
            if tx.sync_mode != core.SyncMode.JITS:
                return Rejection("RejectedOpenMode", "channel open must arrive via joint sync")
            if entry is not None:
                return Rejection("DuplicateChannel")
            if not self._sigs_ok(body, tx, (body.alice, body.bob)):
                return Rejection("MissingSignature")
            return None

        if entry is None:
            return Rejection("UnknownChannel")
        body_total = body.balances[0] + body.balances[1]
        if body.kind != ChannelTxKind.PUNISH and body_total != entry.total:
            return Rejection("ConservationViolated", f"{body.balances} vs total {entry.total}")
        if entry.status in (ChannelStatus.CLOSED, ChannelStatus.PUNISH_CLOSED):
            return Rejection("ChannelAlreadyClosed")

        if body.kind in (ChannelTxKind.UPDATE, ChannelTxKind.CLOSE):
            # an update or close on-chain is a close attempt
            if not self._sigs_ok(body, tx, (body.alice, body.bob)):
                return Rejection("MissingSignature")
            if entry.pending is not None:
                if entry.pending.close_id == tx.id:
                    return Rejection("DuplicateId")
                # two distinct closes for one channel: the later one to
                # synchronize is refused, on every chain
                if sync_key < entry.pending.sync_key:
                    return None  # earlier than what we hold; caller swaps it in
                return Rejection("ConflictingClose", "a close for this channel is already synchronized")
            return None

        if body.kind == ChannelTxKind.CONFIRM_CLOSE:
            pending = entry.pending
            if pending is None or pending.seq != body.seq:
                return Rejection("NoMatchingClose")
            if pending.kind == ChannelTxKind.CLOSE:
                return Rejection("NoMatchingClose", "joint closes need no confirmation")
            closer = pending.closer
            counterparty = body.bob if closer == body.alice else body.alice
            if submitter == counterparty:
                # the counterparty consents; takes effect without waiting
                if not self._sigs_ok(body, tx, (counterparty,)):
                    return Rejection("MissingSignature")
                return None
            if not self._sigs_ok(body, tx, (closer,) if closer else (body.alice, body.bob)):
                return Rejection("MissingSignature")
            if pending.waiting_since is None or now < pending.waiting_since + self.delta_t:
                return Rejection("RejectedEarlyConfirm",
                                 "confirmation published before the dispute window elapsed")
            return None

        if body.kind == ChannelTxKind.PUNISH:
            if not self._sigs_ok(body, tx, (body.alice, body.bob)):
                return Rejection("MissingSignature")
            pending = entry.pending
            if pending is None or pending.kind != ChannelTxKind.UPDATE or pending.seq != body.seq:
                return Rejection("NoSuchStaleClose")
            if pending.waiting_since is not None and now > pending.waiting_since + self.delta_t:
                return Rejection("DisputeWindowMissed")
            return None

        return Rejection("UnsupportedKind")

    # -- transitions --------------------------------------------------------

    def register_open(self, tx: core.Transaction) -> BookEntry:
        body = decode_body(tx.payload)
        entry = BookEntry(body=body)
        self.channels[body.channel_id] = entry
        return entry

    def mark_opened(self, channel_id: bytes) -> None:
        self.channels[channel_id].opened = True

    def register_close_attempt(
        self,
        tx: core.Transaction,
        now: int,
        sync_key: tuple[int, int],
        closer: Optional[str],
    ) -> None:
        body = decode_body(tx.payload)
        entry = self.channels[body.channel_id]
        if entry.pending is not None and sync_key < entry.pending.sync_key:
            entry.voided_closes.add(entry.pending.close_id)
            entry.pending = None
        if entry.pending is None:
            entry.pending = PendingClose(
                close_id=tx.id,
                kind=body.kind,
                seq=body.seq,
                balances=body.balances,
                closer=closer,
                sync_key=sync_key,
                recorded_tick=now,
            )
            entry.status = (
                ChannelStatus.CLOSING_UNILATERAL if body.kind == ChannelTxKind.UPDATE else entry.status
            )

    def begin_dispute_window(self, channel_id: bytes, now: int) -> None:
        entry = self.channels[channel_id]
        if entry.pending is not None and entry.pending.waiting_since is None:
            entry.pending.waiting_since = now

    def settle(self, channel_id: bytes, balances: tuple[int, int]) -> BookEntry:
        entry = self.channels[channel_id]
        entry.status = ChannelStatus.CLOSED
        entry.credited = balances
        return entry

    def punish(self, channel_id: bytes, beneficiary: str) -> BookEntry:
        entry = self.channels[channel_id]
        entry.status = ChannelStatus.PUNISH_CLOSED
        entry.beneficiary = beneficiary
        total = entry.total
        entry.credited = (total, 0) if beneficiary == entry.body.alice else (0, total)
        return entry
