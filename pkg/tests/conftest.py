import random

import pytest

from chainspan import accumulator as acc
from chainspan import core


@pytest.fixture(scope="session")
def pp512():
    return acc.setup(512, b"\x11" * 32)


@pytest.fixture(scope="session")
def pp1024():
    return acc.setup(1024, b"\x22" * 32)


def random_txid(rng: random.Random) -> bytes:
    return bytes(rng.getrandbits(8) for _ in range(32))


def make_intra(nonce: int, payload: bytes = b"intra") -> core.Transaction:
    return core.make_tx(core.TxKind.INTRA_CHAIN, payload, nonce)


def make_cross(nonce: int, payload: bytes = b"cross", mode=core.SyncMode.UITS) -> core.Transaction:
    return core.make_tx(core.TxKind.CROSS_CHAIN, payload, nonce, sync_mode=mode)
