"""Shared test bench: deterministic keys, genesis builders, and a block
producer that signs blocks independently of the consensus node code."""

import pytest

from gridexchange.chain import Chain, scheduled_producer, sign_transaction
from gridexchange.crypto import KeyPair, MultisigAccount, generate_keypair, sha256, sign
from gridexchange.genesis import build_genesis_state
from gridexchange.model import (
    Block,
    BlockHeader,
    Payload,
    SignedTransaction,
    Transaction,
    encode_header,
    encode_tx_list,
)

NAMES = ("alice", "bob", "carol", "dave", "erin", "frank")


def test_key(name: str) -> KeyPair:
    return generate_keypair(sha256(b"test-key:" + name.encode()))


@pytest.fixture(scope="session")
def keys() -> dict[str, KeyPair]:
    return {name: test_key(name) for name in NAMES}


class Bench:
    """A chain plus everything needed to extend it with hand-built blocks.

    Blocks are assembled here rather than via the consensus node so chain
    tests do not depend on the production code path they are checking.
    """

    def __init__(
        self,
        authorities: list[str],
        balances: dict[str, int],
        qualified: set[str] | None = None,
        governors: list[str] | None = None,
        threshold: int | None = None,
        names: tuple[str, ...] = NAMES,
        **params,
    ):
        self.keys = {name: test_key(name) for name in names}
        self.by_address = {pair.address: pair for pair in self.keys.values()}
        members = tuple(sorted(self.keys[g].address for g in (governors or list(names)[:3])))
        self.account = MultisigAccount(
            members=members, threshold=threshold or (len(members) // 2 + 1)
        )
        self.genesis_state = build_genesis_state(
            [self.keys[a].address for a in authorities],
            self.account,
            {self.keys[n].address: amount for n, amount in balances.items()},
            {self.keys[q].address for q in (qualified if qualified is not None else balances)},
            **params,
        )
        self.chain = Chain(self.genesis_state)
        self.nonces: dict[bytes, int] = {}

    def address(self, name: str) -> bytes:
        return self.keys[name].address

    def tx(self, sender: str, payload: Payload, nonce: int | None = None) -> SignedTransaction:
        """Sign a payload, tracking nonces per sender unless overridden."""
        addr = self.keys[sender].address
        if nonce is None:
            nonce = self.nonces.get(addr, 0)
            self.nonces[addr] = nonce + 1
        return sign_transaction(Transaction(addr, nonce, payload), self.keys[sender])

    def multisig_tx(self, sender_addr: bytes, payload: Payload, *signer_names: str, nonce: int | None = None) -> SignedTransaction:
        if nonce is None:
            nonce = self.nonces.get(sender_addr, 0)
            self.nonces[sender_addr] = nonce + 1
        return sign_transaction(
            Transaction(sender_addr, nonce, payload),
            *(self.keys[n] for n in signer_names),
        )

    def produce(self, *txs: SignedTransaction, tick: int | None = None) -> Block:
        head = self.chain.head.header
        height = head.height + 1
        params = self.genesis_state.params
        producer = scheduled_producer(list(params.authorities), height)
        pair = self.by_address[producer]
        if tick is None:
            tick = head.tick + params.block_interval_ticks
        header = BlockHeader(
            height=height,
            prev_hash=self.chain.head_hash,
            producer=producer,
            tick=tick,
            body_hash=sha256(encode_tx_list(tuple(txs))),
        )
        block = Block(
            header=header,
            txs=tuple(txs),
            producer_pubkey=pair.public_key,
            producer_signature=sign(pair.private_key, encode_header(header)),
        )
        self.chain.append(block)
        return block

    def produce_until(self, height: int) -> None:
        while self.chain.height < height:
            self.produce()


@pytest.fixture()
def bench() -> Bench:
    return Bench(
        authorities=["alice"],
        balances={"alice": 10_000, "bob": 10_000, "carol": 10_000, "dave": 10_000},
    )


@pytest.fixture()
def rotating_bench() -> Bench:
    return Bench(
        authorities=["alice", "bob", "carol"],
        balances={"alice": 10_000, "bob": 10_000, "carol": 10_000, "dave": 10_000},
    )
