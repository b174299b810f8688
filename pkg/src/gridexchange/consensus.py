"""Round-robin proof-of-authority production, fork choice, and the node
state machine shared by the simulator and the live service.

A node owns a verified chain, a mempool ordered by arrival, an orphan
buffer keyed by missing parent, and a side store for fork branches.  All
methods are synchronous and transport-free: they return blocks or request
digests for the caller to ship, which keeps the logic deterministic and
directly testable.
"""

from dataclasses import dataclass

from .chain import (
    Chain,
    InvalidBlockError,
    check_tx_signatures,
    scheduled_producer,
)
from .crypto import KeyPair, sha256, sign
from .model import (
    Block,
    BlockHeader,
    ChainState,
    SignedTransaction,
    block_hash,
    encode_header,
    encode_tx_list,
    header_hash,
    tx_id,
)

# How long a node waits before re-requesting a block it never received.
REQUEST_RETRY_TICKS = 8


@dataclass(frozen=True)
class AuthoritySchedule:
    """Ordered producer rotation plus the minimum block spacing."""

    authorities: tuple[bytes, ...]
    block_interval_ticks: int

    def __post_init__(self):
        if not self.authorities:
            raise ValueError("authority schedule must not be empty")
        if self.block_interval_ticks < 1:
            raise ValueError("block interval must be at least one tick")


def schedule_from_state(state: ChainState) -> AuthoritySchedule:
    return AuthoritySchedule(
        authorities=state.params.authorities,
        block_interval_ticks=state.params.block_interval_ticks,
    )


def producer_for(schedule: AuthoritySchedule, height: int) -> bytes:
    """Round-robin: authorities[height mod count]."""
    return scheduled_producer(schedule.authorities, height)


def fork_choice(schedule: AuthoritySchedule, a: BlockHeader, b: BlockHeader) -> BlockHeader:
    """Pick one tip: height, then earlier schedule position, then lower hash.

    Total and deterministic so every node resolves identically.
    """
    if a.height != b.height:
        return a if a.height > b.height else b
    try:
        ia = schedule.authorities.index(a.producer)
    except ValueError:
        ia = len(schedule.authorities)
    try:
        ib = schedule.authorities.index(b.producer)
    except ValueError:
        ib = len(schedule.authorities)
    if ia != ib:
        return a if ia < ib else b
    return a if header_hash(a) <= header_hash(b) else b


class Node:
    """One network participant; produces blocks when its slot comes up.

    ``keypair`` may be None for an observer that only follows the chain.
    """

    def __init__(self, node_id: int, genesis_state: ChainState, keypair: KeyPair | None = None):
        self.id = node_id
        self.keypair = keypair
        self.chain = Chain(genesis_state)
        self.schedule = schedule_from_state(genesis_state)
        # tx_id -> (arrival tick, tx); canonical order is (arrival, id bytes)
        self.mempool: dict[bytes, tuple[int, SignedTransaction]] = {}
        self.orphans: dict[bytes, dict[bytes, Block]] = {}
        self._orphan_hashes: set[bytes] = set()
        self.side_blocks: dict[bytes, Block] = {}
        self._requested: dict[bytes, int] = {}
        self.discard_log: list[tuple[int, str]] = []

    # --- ingress -------------------------------------------------------------

    def on_receive_tx(self, stx: SignedTransaction, tick: int) -> bool:
        """Admit a transaction to the mempool; True if it is new and sane.

        Signature validity and a not-yet-consumed nonce gate admission; kind
        rules are judged at inclusion time so their rejections land on chain.
        """
        tid = tx_id(stx)
        if tid in self.mempool or self.chain.receipt_for(tid) is not None:
            return False
        if check_tx_signatures(self.chain.state, stx) is not None:
            return False
        if stx.tx.nonce < self.chain.state.account(stx.tx.sender).nonce:
            return False
        self.mempool[tid] = (tick, stx)
        return True

    def on_receive_block(self, block: Block, tick: int) -> tuple[str, list[bytes]]:
        """Feed one block in; returns (status, parent digests to request)."""
        bh = block_hash(block)
        if self._knows(bh):
            return "known", []
        parent_hash = block.header.prev_hash
        if parent_hash == self.chain.head_hash and block.header.height == self.chain.height + 1:
            try:
                self.chain.append(block)
            except InvalidBlockError as exc:
                self.discard_log.append((tick, f"block {bh.hex()[:12]}: {exc.reason}"))
                return "invalid", []
            self._drain_orphans(tick)
            self._prune_mempool()
            return "accepted", []
        if self.chain.height_of(parent_hash) is not None or parent_hash in self.side_blocks:
            self.side_blocks[bh] = block
            if fork_choice(self.schedule, self.chain.head.header, block.header) is block.header:
                if self._adopt_branch(block, tick):
                    self._drain_orphans(tick)
                    self._prune_mempool()
                    return "accepted", []
            return "side", []
        self.orphans.setdefault(parent_hash, {})[bh] = block
        self._orphan_hashes.add(bh)
        requests = [parent_hash] if self._want(parent_hash, tick) else []
        return "orphaned", requests

    def on_receive_head(self, height: int, head_digest: bytes, tick: int) -> list[bytes]:
        """React to a peer's head announcement with any block requests."""
        if height <= self.chain.height:
            return []
        requests = []
        if not self._knows(head_digest) and self._want(head_digest, tick):
            requests.append(head_digest)
        for parent_hash in list(self.orphans):
            if not self._knows(parent_hash) and self._want(parent_hash, tick):
                requests.append(parent_hash)
        return requests

    def on_block_request(self, digest: bytes) -> Block | None:
        """Serve a block we have fully verified; None otherwise."""
        height = self.chain.height_of(digest)
        if height is not None:
            return self.chain.block_at(height)
        return None

    # --- production ------------------------------------------------------------

    def try_produce(self, tick: int) -> Block | None:
        """Produce, apply and return the next block when it is our slot.

        Mempool transactions enter in canonical order; stale or unsigned
        entries are dropped, future nonces held back for a later block.
        """
        if self.keypair is None:
            return None
        height = self.chain.height + 1
        if producer_for(self.schedule, height) != self.keypair.address:
            return None
        head = self.chain.head.header
        if tick < head.tick + self.schedule.block_interval_ticks:
            return None

        chosen: list[SignedTransaction] = []
        next_nonces: dict[bytes, int] = {}
        drop: list[bytes] = []
        for tid, (_, stx) in sorted(self.mempool.items(), key=lambda kv: (kv[1][0], kv[0])):
            sender = stx.tx.sender
            expected = next_nonces.get(sender, self.chain.state.account(sender).nonce)
            if check_tx_signatures(self.chain.state, stx) is not None:
                drop.append(tid)
                continue
            if stx.tx.nonce < expected:
                drop.append(tid)
                continue
            if stx.tx.nonce > expected:
                continue
            chosen.append(stx)
            next_nonces[sender] = expected + 1
        for tid in drop:
            del self.mempool[tid]

        txs = tuple(chosen)
        header = BlockHeader(
            height=height,
            prev_hash=self.chain.head_hash,
            producer=self.keypair.address,
            tick=tick,
            body_hash=sha256(encode_tx_list(txs)),
        )
        block = Block(
            header=header,
            txs=txs,
            producer_pubkey=self.keypair.public_key,
            producer_signature=sign(self.keypair.private_key, encode_header(header)),
        )
        self.chain.append(block)
        self._drain_orphans(tick)
        self._prune_mempool()
        return block

    # --- internals -------------------------------------------------------------

    def _knows(self, digest: bytes) -> bool:
        return (
            self.chain.height_of(digest) is not None
            or digest in self.side_blocks
            or digest in self._orphan_hashes
        )

    def _want(self, digest: bytes, tick: int) -> bool:
        last = self._requested.get(digest)
        if last is not None and tick - last < REQUEST_RETRY_TICKS:
            return False
        self._requested[digest] = tick
        return True

    def _prune_mempool(self) -> None:
        for tid in list(self.mempool):
            if self.chain.receipt_for(tid) is not None:
                del self.mempool[tid]

    def _drain_orphans(self, tick: int) -> None:
        progressed = True
        while progressed:
            progressed = False
            children = self.orphans.pop(self.chain.head_hash, None)
            if not children:
                break
            for bh in sorted(children):
                block = children[bh]
                self._orphan_hashes.discard(bh)
                if (
                    block.header.prev_hash == self.chain.head_hash
                    and block.header.height == self.chain.height + 1
                ):
                    try:
                        self.chain.append(block)
                        progressed = True
                    except InvalidBlockError as exc:
                        self.discard_log.append((tick, f"orphan {bh.hex()[:12]}: {exc.reason}"))
                else:
                    self.side_blocks[bh] = block

    def _adopt_branch(self, tip: Block, tick: int) -> bool:
        """Rebuild the chain onto a heavier side branch, if it validates."""
        branch = [tip]
        cursor = tip.header.prev_hash
        while cursor in self.side_blocks:
            parent = self.side_blocks[cursor]
            branch.append(parent)
            cursor = parent.header.prev_hash
        fork_height = self.chain.height_of(cursor)
        if fork_height is None:
            return False
        rebuilt = Chain(self.chain.genesis_state)
        try:
            for block in self.chain.blocks[1 : fork_height + 1]:
                rebuilt.append(block, check_producer_sig=False)
            for block in reversed(branch):
                rebuilt.append(block)
        except InvalidBlockError as exc:
            self.discard_log.append((tick, f"branch {block_hash(tip).hex()[:12]}: {exc.reason}"))
            self.side_blocks.pop(block_hash(tip), None)
            return False
        self.chain = rebuilt
        return True
