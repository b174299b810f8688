"""Block validation, state application, chain verification and provenance.

Verification runs in staged passes over raw log records so that the common
tampered case fails fast: frame and hash checks first (cheap), producer
signatures second, full decode and transaction replay last.  A flipped byte
almost always dies in the first pass; only signature-field flips ever cost
an Ed25519 operation.
"""

import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .blocklog import CorruptLogError, iter_frames_strict
from .codec import DecodeError
from .contracts import execute, finalize_due_auctions
from .crypto import (
    PUBKEY_LEN,
    SIG_LEN,
    KeyPair,
    derive_address,
    multisig_address,
    sha256,
    sign,
    verify,
    verify_multisig,
)
from .model import (
    HEADER_LEN,
    ZERO_DIGEST,
    Block,
    BlockHeader,
    ChainState,
    Event,
    Receipt,
    RegistryUpdate,
    Reject,
    SignedTransaction,
    Transaction,
    TxSignature,
    accepted,
    block_hash,
    decode_block,
    encode_block,
    encode_header,
    encode_transaction,
    encode_tx_list,
    header_hash,
    rejected,
    tx_id,
)

_HEADER_STRUCT = struct.Struct("<QI32sI20sQI32s")
_TAIL_STRUCT = struct.Struct("<I32sI64s")
TAIL_LEN = _TAIL_STRUCT.size
# Smallest well-formed record: header, empty tx list count, key and signature.
MIN_RECORD_LEN = HEADER_LEN + 4 + TAIL_LEN


class InvalidBlockError(Exception):
    """Block fails a linkage, schedule, hash or signature check."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class UnknownLotError(Exception):
    def __init__(self, lot_id: bytes):
        super().__init__(f"unknown lot {lot_id.hex()}")
        self.lot_id = lot_id


def scheduled_producer(authorities: Sequence[bytes], height: int) -> bytes:
    """Round-robin authority for ``height``."""
    return authorities[height % len(authorities)]


def make_genesis_block(genesis_state: ChainState) -> Block:
    """The deterministic height-0 block every log starts with.

    Carries no transactions and a zero signature; verification treats it by
    byte equality against this construction rather than by signature.
    """
    header = BlockHeader(
        height=0,
        prev_hash=ZERO_DIGEST,
        producer=scheduled_producer(genesis_state.params.authorities, 0),
        tick=0,
        body_hash=sha256(encode_tx_list(())),
    )
    return Block(
        header=header,
        txs=(),
        producer_pubkey=bytes(PUBKEY_LEN),
        producer_signature=bytes(SIG_LEN),
    )


# --- transaction application --------------------------------------------------


def sign_transaction(tx: Transaction, *keypairs: KeyPair) -> SignedTransaction:
    """Sign the canonical transaction bytes with one key per signer.

    Single-signer kinds pass one keypair; registry updates pass each
    consenting authority member's keypair.
    """
    message = encode_transaction(tx)
    signatures = tuple(
        TxSignature(
            address=kp.address,
            public_key=kp.public_key,
            signature=sign(kp.private_key, message),
        )
        for kp in keypairs
    )
    return SignedTransaction(tx=tx, signatures=signatures)


def check_tx_signatures(state: ChainState, stx: SignedTransaction) -> Reject | None:
    """Stage 1 of validation.

    Registry updates must be sent from the authority multisig address and
    carry threshold signatures; every other kind needs exactly one valid
    signature by the sender.  Public keys ride in the signature entries and
    must hash to their claimed addresses.
    """
    tx = stx.tx
    message = encode_transaction(tx)
    if isinstance(tx.payload, RegistryUpdate):
        authority = state.params.authority_account
        if tx.sender != multisig_address(authority):
            return Reject.BAD_MULTISIG
        triples = [(s.address, s.public_key, s.signature) for s in stx.signatures]
        if not verify_multisig(authority, message, triples):
            return Reject.BAD_MULTISIG
        return None
    if len(stx.signatures) != 1:
        return Reject.BAD_SIGNATURE
    entry = stx.signatures[0]
    if entry.address != tx.sender:
        return Reject.BAD_SIGNATURE
    if derive_address(entry.public_key) != entry.address:
        return Reject.BAD_SIGNATURE
    if not verify(entry.public_key, message, entry.signature):
        return Reject.BAD_SIGNATURE
    return None


def apply_transaction(
    state: ChainState, stx: SignedTransaction, height: int, producer: bytes
) -> Receipt:
    """Run the full check order against ``state`` (a clone the caller owns)
    and mutate it on acceptance.

    The nonce is consumed once signature and nonce checks pass, even if a
    later stage rejects: replaying a rejected transaction must not work.
    Kind handlers touch state only after all their checks, so a rejection
    leaves everything else untouched.
    """
    tid = tx_id(stx)
    reason = check_tx_signatures(state, stx)
    if reason is not None:
        return rejected(tid, reason)
    acct = state.account(stx.tx.sender)
    if stx.tx.nonce != acct.nonce:
        return rejected(tid, Reject.BAD_NONCE)
    state.accounts[stx.tx.sender] = replace(acct, nonce=acct.nonce + 1)
    result = execute(state, stx.tx, height, producer)
    if isinstance(result, Reject):
        return rejected(tid, result)
    return accepted(tid, *result)


def validate_transaction(state: ChainState, stx: SignedTransaction, height: int) -> Receipt:
    """Dry-run ``stx`` as it would apply at ``height``; state is untouched."""
    scratch = state.clone()
    producer = scheduled_producer(state.params.authorities, height)
    return apply_transaction(scratch, stx, height, producer)


def apply_block(
    state: ChainState,
    block: Block,
    parent: BlockHeader | None = None,
    *,
    check_producer_sig: bool = True,
) -> tuple[ChainState, list[Receipt]]:
    """Validate ``block`` against its parent's ``state`` and apply it.

    Linkage (height, prev_hash, tick) is checked when ``parent`` is given;
    schedule, body hash and producer signature always are.  Receipts cover
    every transaction in order, then one receipt per auto-finalized auction
    keyed by the auction id.
    """
    header = block.header
    if parent is not None:
        if header.height != parent.height + 1:
            raise InvalidBlockError(
                f"height {header.height} does not follow parent {parent.height}"
            )
        if header.prev_hash != header_hash(parent):
            raise InvalidBlockError(f"prev_hash mismatch at height {header.height}")
        if header.tick <= parent.tick:
            raise InvalidBlockError(f"tick {header.tick} not after parent {parent.tick}")
    expected_producer = scheduled_producer(state.params.authorities, header.height)
    if header.producer != expected_producer:
        raise InvalidBlockError(f"wrong producer for height {header.height}")
    if header.body_hash != sha256(encode_tx_list(block.txs)):
        raise InvalidBlockError(f"body hash mismatch at height {header.height}")
    if derive_address(block.producer_pubkey) != header.producer:
        raise InvalidBlockError(f"producer key mismatch at height {header.height}")
    if check_producer_sig and not verify(
        block.producer_pubkey, encode_header(header), block.producer_signature
    ):
        raise InvalidBlockError(f"bad producer signature at height {header.height}")

    new_state = state.clone()
    receipts: list[Receipt] = []
    for stx in block.txs:
        receipts.append(apply_transaction(new_state, stx, header.height, header.producer))
    for auction_id, events in finalize_due_auctions(new_state, header.height):
        receipts.append(accepted(auction_id, *events))
    return new_state, receipts


class Chain:
    """A verified chain from genesis: blocks, receipts, and the head state.

    Only the head state is retained; historical states are recomputable by
    replay.  A single writer appends; readers may hold old references.
    """

    def __init__(self, genesis_state: ChainState, genesis_block: Block | None = None):
        expected = make_genesis_block(genesis_state)
        if genesis_block is not None and encode_block(genesis_block) != encode_block(expected):
            raise InvalidBlockError("genesis block does not match genesis state")
        self.genesis_state = genesis_state
        self.blocks: list[Block] = [expected]
        self.state: ChainState = genesis_state
        self.receipts: list[list[Receipt]] = [[]]
        self._height_by_hash: dict[bytes, int] = {block_hash(expected): 0}
        self._receipt_by_id: dict[bytes, tuple[int, Receipt]] = {}

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return self.head.header.height

    @property
    def head_hash(self) -> bytes:
        return block_hash(self.head)

    def block_at(self, height: int) -> Block:
        return self.blocks[height]

    def receipts_at(self, height: int) -> list[Receipt]:
        return self.receipts[height]

    def height_of(self, digest: bytes) -> int | None:
        return self._height_by_hash.get(digest)

    def receipt_for(self, tid: bytes) -> tuple[int, Receipt] | None:
        """Receipt for a transaction id, with the height it landed at."""
        return self._receipt_by_id.get(tid)

    def append(self, block: Block, *, check_producer_sig: bool = True) -> list[Receipt]:
        new_state, receipts = apply_block(
            self.state, block, self.head.header, check_producer_sig=check_producer_sig
        )
        self.blocks.append(block)
        self.state = new_state
        self.receipts.append(receipts)
        self._height_by_hash[block_hash(block)] = block.header.height
        for receipt in receipts:
            # Finalization receipts reuse the opening tx id; keep first wins.
            self._receipt_by_id.setdefault(receipt.tx_id, (block.header.height, receipt))
        return receipts

    def trace_lot(self, lot_id: bytes) -> list[Event]:
        if lot_id not in self.state.lots:
            raise UnknownLotError(lot_id)
        return _filter_lot_events(self.receipts, lot_id)


# --- verification ---------------------------------------------------------------


@dataclass
class VerifyResult:
    """Outcome of chain verification; truthy iff the chain is intact."""

    ok: bool
    blocks: int
    error: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def _fail(message: str) -> VerifyResult:
    return VerifyResult(ok=False, blocks=0, error=message)


def _verify_records(records: list[memoryview], genesis_state: ChainState) -> VerifyResult:
    authorities = genesis_state.params.authorities
    genesis_bytes = encode_block(make_genesis_block(genesis_state))
    if bytes(records[0]) != genesis_bytes:
        return _fail("record 0: not the genesis block for this configuration")

    # Pass A: structure, linkage, schedule and hashes, no decoding or
    # signature work.  Nearly every corruption lands here.
    header_slices: list[bytes] = []
    producers: list[bytes] = []
    pubkeys: list[bytes] = []
    sigs: list[bytes] = []
    prev_digest = sha256(bytes(records[0][:HEADER_LEN]))
    prev_tick = 0
    for i in range(1, len(records)):
        rec = records[i]
        if len(rec) < MIN_RECORD_LEN:
            return _fail(f"record {i}: shorter than a minimal block")
        header = bytes(rec[:HEADER_LEN])
        height, l1, prev_hash, l2, producer, tick, l3, body_hash = _HEADER_STRUCT.unpack(header)
        if (l1, l2, l3) != (32, 20, 32):
            return _fail(f"record {i}: malformed header field lengths")
        if height != i:
            return _fail(f"record {i}: height {height} out of sequence")
        if prev_hash != prev_digest:
            return _fail(f"record {i}: prev_hash does not match record {i - 1}")
        if producer != scheduled_producer(authorities, i):
            return _fail(f"record {i}: producer violates the schedule")
        if tick <= prev_tick:
            return _fail(f"record {i}: tick not increasing")
        if body_hash != sha256(rec[HEADER_LEN:-TAIL_LEN]):
            return _fail(f"record {i}: body hash mismatch")
        t1, pubkey, t2, sig = _TAIL_STRUCT.unpack(rec[-TAIL_LEN:])
        if (t1, t2) != (PUBKEY_LEN, SIG_LEN):
            return _fail(f"record {i}: malformed signature field lengths")
        header_slices.append(header)
        producers.append(producer)
        pubkeys.append(pubkey)
        sigs.append(sig)
        prev_digest = sha256(header)
        prev_tick = tick

    # Pass B: producer keys must hash to the scheduled address (cheap),
    # then the Ed25519 signatures over the header bytes (the costly part).
    for i, (pubkey, producer) in enumerate(zip(pubkeys, producers), start=1):
        if derive_address(pubkey) != producer:
            return _fail(f"record {i}: producer key does not match address")
    for i, (pubkey, header, sig) in enumerate(zip(pubkeys, header_slices, sigs), start=1):
        if not verify(pubkey, header, sig):
            return _fail(f"record {i}: bad producer signature")

    # Pass C: full decode and replay; producer signatures already checked.
    try:
        blocks = [decode_block(bytes(rec)) for rec in records]
    except DecodeError as exc:
        return _fail(f"decode failed: {exc}")
    try:
        replay(blocks, genesis_state, check_producer_sig=False)
    except InvalidBlockError as exc:
        return _fail(f"replay failed: {exc.reason}")
    return VerifyResult(ok=True, blocks=len(records))


def verify_log_bytes(data: bytes, genesis_state: ChainState) -> VerifyResult:
    """Verify a full serialized log image, strict about framing."""
    try:
        frames = iter_frames_strict(data)
    except CorruptLogError as exc:
        return _fail(str(exc))
    if not frames:
        return _fail("empty log: no genesis record")
    return _verify_records([frame for _, frame in frames], genesis_state)


def verify_log(path: str | Path, genesis_state: ChainState) -> VerifyResult:
    return verify_log_bytes(Path(path).read_bytes(), genesis_state)


def verify_chain(blocks: list[Block], genesis_state: ChainState) -> VerifyResult:
    """Verify in-memory blocks; same checks as the log-bytes path."""
    if not blocks:
        return _fail("empty chain: no genesis block")
    records = [memoryview(encode_block(b)) for b in blocks]
    return _verify_records(records, genesis_state)


def replay(
    blocks: list[Block],
    genesis_state: ChainState,
    *,
    check_producer_sig: bool = True,
) -> tuple[ChainState, list[list[Receipt]]]:
    """Re-apply ``blocks`` from genesis, returning head state and receipts."""
    if not blocks:
        raise InvalidBlockError("empty chain: no genesis block")
    chain = Chain(genesis_state, genesis_block=blocks[0])
    for block in blocks[1:]:
        chain.append(block, check_producer_sig=check_producer_sig)
    return chain.state, chain.receipts


def _filter_lot_events(receipts: list[list[Receipt]], lot_id: bytes) -> list[Event]:
    want = lot_id.hex()
    return [
        event
        for per_height in receipts
        for receipt in per_height
        for event in receipt.events
        if event.data.get("lot_id") == want
    ]


def trace_lot(history: list[Block], lot_id: bytes, genesis_state: ChainState) -> list[Event]:
    """Provenance of a lot: every event naming it, in chain order.

    The first element is always the mint; ownership moves only through
    transfer and settlement events, so consecutive entries link up.
    """
    state, receipts = replay(history, genesis_state)
    if lot_id not in state.lots:
        raise UnknownLotError(lot_id)
    return _filter_lot_events(receipts, lot_id)
