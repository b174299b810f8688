"""Domain types and their canonical byte encodings.

Everything that gets hashed, signed or persisted lives here: transactions,
blocks, and the full chain state.  Types are frozen dataclasses treated as
immutable values; state transitions build new values instead of mutating.

Binary fields are raw ``bytes`` internally (20-byte addresses, 32-byte
digests); hex appears only at the JSON boundary.
"""

from dataclasses import dataclass, replace
from enum import Enum, IntEnum

from .codec import DecodeError, Reader, Writer
from .crypto import (
    ADDRESS_LEN,
    DIGEST_LEN,
    PUBKEY_LEN,
    SIG_LEN,
    MultisigAccount,
    sha256,
)

ZERO_DIGEST = bytes(DIGEST_LEN)

# Fixed byte length of a canonically encoded block header:
# height u64 + prev_hash (4+32) + producer (4+20) + tick u64 + body_hash (4+32).
HEADER_LEN = 8 + 36 + 24 + 8 + 36


class TxKind(IntEnum):
    """Transaction kind tags, in canonical declaration order."""

    TRANSFER = 0
    OPEN_AUCTION = 1
    PLACE_BID = 2
    MINT_LOT = 3
    TRANSFER_LOT = 4
    TRANSFER_BOND = 5
    REDEEM_BOND = 6
    REGISTRY_UPDATE = 7


class SettlementMode(IntEnum):
    CASH = 0
    BOND_ALLOWED = 1


class AuctionStatus(IntEnum):
    OPEN = 0
    SETTLED = 1
    DISCARDED = 2


class BondState(IntEnum):
    OUTSTANDING = 0
    REDEEMED = 1
    DEFAULTED = 2


class Reject(str, Enum):
    """Rejection reasons, in the order validation checks them."""

    BAD_SIGNATURE = "BAD_SIGNATURE"
    BAD_NONCE = "BAD_NONCE"
    BAD_MULTISIG = "BAD_MULTISIG"
    NOT_QUALIFIED = "NOT_QUALIFIED"
    INSUFFICIENT_FUNDS = "INSUFFICIENT_FUNDS"
    NOT_OWNER = "NOT_OWNER"
    NOT_HOLDER = "NOT_HOLDER"
    LOT_LOCKED = "LOT_LOCKED"
    UNKNOWN_LOT = "UNKNOWN_LOT"
    UNKNOWN_AUCTION = "UNKNOWN_AUCTION"
    UNKNOWN_BOND = "UNKNOWN_BOND"
    AUCTION_CLOSED = "AUCTION_CLOSED"
    SELF_BID = "SELF_BID"
    BID_TOO_LOW = "BID_TOO_LOW"
    BOND_CLOSED = "BOND_CLOSED"
    NOT_MATURE = "NOT_MATURE"
    BAD_PARAMS = "BAD_PARAMS"


class EventKind(str, Enum):
    LOT_MINTED = "lot_minted"
    LOT_TRANSFERRED = "lot_transferred"
    AUCTION_OPENED = "auction_opened"
    BID_ACCEPTED = "bid_accepted"
    BID_REFUNDED = "bid_refunded"
    AUCTION_SETTLED = "auction_settled"
    AUCTION_DISCARDED = "auction_discarded"
    BOND_MINTED = "bond_minted"
    BOND_TRANSFERRED = "bond_transferred"
    BOND_REDEEMED = "bond_redeemed"
    BOND_DEFAULTED = "bond_defaulted"
    REGISTRY_UPDATED = "registry_updated"


# --- transaction payloads -------------------------------------------------


@dataclass(frozen=True)
class Transfer:
    to: bytes
    amount: int

    kind = TxKind.TRANSFER


@dataclass(frozen=True)
class OpenAuction:
    lot_id: bytes
    base_price: int
    min_increment: int
    duration_blocks: int
    mode: SettlementMode

    kind = TxKind.OPEN_AUCTION


@dataclass(frozen=True)
class PlaceBid:
    auction_id: bytes
    amount: int

    kind = TxKind.PLACE_BID


@dataclass(frozen=True)
class MintLot:
    kwh: int

    kind = TxKind.MINT_LOT


@dataclass(frozen=True)
class TransferLot:
    to: bytes
    lot_id: bytes

    kind = TxKind.TRANSFER_LOT


@dataclass(frozen=True)
class TransferBond:
    to: bytes
    bond_id: bytes

    kind = TxKind.TRANSFER_BOND


@dataclass(frozen=True)
class RedeemBond:
    bond_id: bytes

    kind = TxKind.REDEEM_BOND


@dataclass(frozen=True)
class RegistryUpdate:
    add: tuple[bytes, ...]
    remove: tuple[bytes, ...]

    kind = TxKind.REGISTRY_UPDATE


Payload = (
    Transfer
    | OpenAuction
    | PlaceBid
    | MintLot
    | TransferLot
    | TransferBond
    | RedeemBond
    | RegistryUpdate
)


@dataclass(frozen=True)
class Transaction:
    sender: bytes
    nonce: int
    payload: Payload

    @property
    def kind(self) -> TxKind:
        return self.payload.kind


@dataclass(frozen=True)
class TxSignature:
    """One signer's entry: the public key rides along because addresses
    are one-way hashes and cannot verify on their own."""

    address: bytes
    public_key: bytes
    signature: bytes


@dataclass(frozen=True)
class SignedTransaction:
    tx: Transaction
    signatures: tuple[TxSignature, ...]


# --- blocks ----------------------------------------------------------------


@dataclass(frozen=True)
class BlockHeader:
    height: int
    prev_hash: bytes
    producer: bytes
    tick: int
    body_hash: bytes


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    txs: tuple[SignedTransaction, ...]
    producer_pubkey: bytes
    producer_signature: bytes


# --- chain state -----------------------------------------------------------


@dataclass(frozen=True)
class Account:
    balance: int
    nonce: int


@dataclass(frozen=True)
class Bid:
    bidder: bytes
    amount: int
    escrowed: int


@dataclass(frozen=True)
class Auction:
    id: bytes
    seller: bytes
    lot_id: bytes
    base_price: int
    min_increment: int
    deadline_height: int
    mode: SettlementMode
    best_bid: Bid | None
    status: AuctionStatus


@dataclass(frozen=True)
class EnergyLot:
    id: bytes
    kwh: int
    origin: bytes
    owner: bytes
    locked_in: bytes | None


@dataclass(frozen=True)
class Bond:
    id: bytes
    face_value: int
    issuer: bytes
    holder: bytes
    maturity_height: int
    state: BondState


@dataclass(frozen=True)
class ProtocolParams:
    gas_fee: int
    default_min_increment: int
    default_auction_duration: int
    bond_maturity_delta: int
    authority_account: MultisigAccount
    authorities: tuple[bytes, ...]
    block_interval_ticks: int


@dataclass
class ChainState:
    """Full ledger state.

    Treated as an immutable value by convention: ``apply_block`` works on a
    :meth:`clone` and callers keep old snapshots safely.  Entry values are
    frozen dataclasses; only the containers are rebuilt on write.
    """

    accounts: dict[bytes, Account]
    auctions: dict[bytes, Auction]
    lots: dict[bytes, EnergyLot]
    bonds: dict[bytes, Bond]
    qualified: frozenset[bytes]
    params: ProtocolParams

    def account(self, address: bytes) -> Account:
        return self.accounts.get(address, Account(balance=0, nonce=0))

    def clone(self) -> "ChainState":
        """Shallow-copy the containers; entries are immutable values."""
        return replace(
            self,
            accounts=dict(self.accounts),
            auctions=dict(self.auctions),
            lots=dict(self.lots),
            bonds=dict(self.bonds),
        )


def total_funds(state: ChainState) -> int:
    """Circulating currency: balances plus escrow held by open auctions.

    Conservation demands this equals the genesis supply after every block.
    """
    balances = sum(acct.balance for acct in state.accounts.values())
    escrows = sum(
        a.best_bid.escrowed
        for a in state.auctions.values()
        if a.status == AuctionStatus.OPEN and a.best_bid is not None
    )
    return balances + escrows


# --- receipts and events ----------------------------------------------------


@dataclass
class Event:
    """Structured event record; ``data`` values are JSON-ready (hex for bytes)."""

    kind: EventKind
    data: dict[str, object]

    def to_json(self) -> dict[str, object]:
        return {"kind": self.kind.value, **self.data}


@dataclass
class Receipt:
    tx_id: bytes
    accepted: bool
    reason: Reject | None
    events: tuple[Event, ...]

    def to_json(self) -> dict[str, object]:
        return {
            "tx_id": self.tx_id.hex(),
            "status": "accepted" if self.accepted else "rejected",
            "reason": self.reason.value if self.reason else None,
            "events": [ev.to_json() for ev in self.events],
        }


def accepted(tx_id: bytes, *events: Event) -> Receipt:
    return Receipt(tx_id=tx_id, accepted=True, reason=None, events=tuple(events))


def rejected(tx_id: bytes, reason: Reject) -> Receipt:
    return Receipt(tx_id=tx_id, accepted=False, reason=reason, events=())


# --- canonical encoding ------------------------------------------------------

_PAYLOAD_TYPES: dict[TxKind, type] = {
    TxKind.TRANSFER: Transfer,
    TxKind.OPEN_AUCTION: OpenAuction,
    TxKind.PLACE_BID: PlaceBid,
    TxKind.MINT_LOT: MintLot,
    TxKind.TRANSFER_LOT: TransferLot,
    TxKind.TRANSFER_BOND: TransferBond,
    TxKind.REDEEM_BOND: RedeemBond,
    TxKind.REGISTRY_UPDATE: RegistryUpdate,
}


def _write_payload(w: Writer, payload: Payload) -> None:
    if isinstance(payload, Transfer):
        w.bytes_(payload.to).u64(payload.amount)
    elif isinstance(payload, OpenAuction):
        w.bytes_(payload.lot_id).u64(payload.base_price).u64(payload.min_increment)
        w.u64(payload.duration_blocks).u8(payload.mode)
    elif isinstance(payload, PlaceBid):
        w.bytes_(payload.auction_id).u64(payload.amount)
    elif isinstance(payload, MintLot):
        w.u64(payload.kwh)
    elif isinstance(payload, TransferLot):
        w.bytes_(payload.to).bytes_(payload.lot_id)
    elif isinstance(payload, TransferBond):
        w.bytes_(payload.to).bytes_(payload.bond_id)
    elif isinstance(payload, RedeemBond):
        w.bytes_(payload.bond_id)
    elif isinstance(payload, RegistryUpdate):
        w.count(len(payload.add))
        for addr in payload.add:
            w.bytes_(addr)
        w.count(len(payload.remove))
        for addr in payload.remove:
            w.bytes_(addr)
    else:  # pragma: no cover - exhaustive by construction
        raise TypeError(f"unknown payload type: {type(payload)!r}")


def _read_payload(r: Reader, kind: TxKind) -> Payload:
    if kind == TxKind.TRANSFER:
        return Transfer(to=r.fixed_bytes(ADDRESS_LEN), amount=r.u64())
    if kind == TxKind.OPEN_AUCTION:
        lot_id = r.fixed_bytes(DIGEST_LEN)
        base = r.u64()
        incr = r.u64()
        dur = r.u64()
        mode_tag = r.u8()
        try:
            mode = SettlementMode(mode_tag)
        except ValueError as exc:
            raise DecodeError(f"bad settlement mode tag {mode_tag}") from exc
        return OpenAuction(lot_id, base, incr, dur, mode)
    if kind == TxKind.PLACE_BID:
        return PlaceBid(auction_id=r.fixed_bytes(DIGEST_LEN), amount=r.u64())
    if kind == TxKind.MINT_LOT:
        return MintLot(kwh=r.u64())
    if kind == TxKind.TRANSFER_LOT:
        return TransferLot(to=r.fixed_bytes(ADDRESS_LEN), lot_id=r.fixed_bytes(DIGEST_LEN))
    if kind == TxKind.TRANSFER_BOND:
        return TransferBond(to=r.fixed_bytes(ADDRESS_LEN), bond_id=r.fixed_bytes(DIGEST_LEN))
    if kind == TxKind.REDEEM_BOND:
        return RedeemBond(bond_id=r.fixed_bytes(DIGEST_LEN))
    if kind == TxKind.REGISTRY_UPDATE:
        add = tuple(r.fixed_bytes(ADDRESS_LEN) for _ in range(r.count()))
        remove = tuple(r.fixed_bytes(ADDRESS_LEN) for _ in range(r.count()))
        return RegistryUpdate(add=add, remove=remove)
    raise DecodeError(f"unknown transaction kind tag {kind}")


def encode_transaction(tx: Transaction) -> bytes:
    w = Writer()
    w.bytes_(tx.sender).u64(tx.nonce).u8(tx.kind)
    _write_payload(w, tx.payload)
    return w.getvalue()


def _read_transaction(r: Reader) -> Transaction:
    sender = r.fixed_bytes(ADDRESS_LEN)
    nonce = r.u64()
    tag = r.u8()
    try:
        kind = TxKind(tag)
    except ValueError as exc:
        raise DecodeError(f"unknown transaction kind tag {tag}") from exc
    payload = _read_payload(r, kind)
    return Transaction(sender=sender, nonce=nonce, payload=payload)


def decode_transaction(data: bytes) -> Transaction:
    r = Reader(data)
    tx = _read_transaction(r)
    r.finish()
    return tx


def encode_signed_transaction(stx: SignedTransaction) -> bytes:
    w = Writer()
    w.raw(encode_transaction(stx.tx))
    w.count(len(stx.signatures))
    for entry in stx.signatures:
        w.bytes_(entry.address).bytes_(entry.public_key).bytes_(entry.signature)
    return w.getvalue()


def _read_signed_transaction(r: Reader) -> SignedTransaction:
    tx = _read_transaction(r)
    sigs = []
    for _ in range(r.count()):
        sigs.append(
            TxSignature(
                address=r.fixed_bytes(ADDRESS_LEN),
                public_key=r.fixed_bytes(PUBKEY_LEN),
                signature=r.fixed_bytes(SIG_LEN),
            )
        )
    return SignedTransaction(tx=tx, signatures=tuple(sigs))


def decode_signed_transaction(data: bytes) -> SignedTransaction:
    r = Reader(data)
    stx = _read_signed_transaction(r)
    r.finish()
    return stx


def encode_header(header: BlockHeader) -> bytes:
    w = Writer()
    w.u64(header.height).bytes_(header.prev_hash).bytes_(header.producer)
    w.u64(header.tick).bytes_(header.body_hash)
    return w.getvalue()


def _read_header(r: Reader) -> BlockHeader:
    return BlockHeader(
        height=r.u64(),
        prev_hash=r.fixed_bytes(DIGEST_LEN),
        producer=r.fixed_bytes(ADDRESS_LEN),
        tick=r.u64(),
        body_hash=r.fixed_bytes(DIGEST_LEN),
    )


def decode_header(data: bytes) -> BlockHeader:
    r = Reader(data)
    header = _read_header(r)
    r.finish()
    return header


def encode_tx_list(txs: tuple[SignedTransaction, ...]) -> bytes:
    """Canonical block body; its hash is the header's ``body_hash``."""
    w = Writer()
    w.count(len(txs))
    for stx in txs:
        w.raw(encode_signed_transaction(stx))
    return w.getvalue()


def encode_block(block: Block) -> bytes:
    w = Writer()
    w.raw(encode_header(block.header))
    w.raw(encode_tx_list(block.txs))
    w.bytes_(block.producer_pubkey).bytes_(block.producer_signature)
    return w.getvalue()


def decode_block(data: bytes) -> Block:
    r = Reader(data)
    header = _read_header(r)
    txs = tuple(_read_signed_transaction(r) for _ in range(r.count()))
    pubkey = r.fixed_bytes(PUBKEY_LEN)
    signature = r.fixed_bytes(SIG_LEN)
    r.finish()
    return Block(header=header, txs=txs, producer_pubkey=pubkey, producer_signature=signature)


def _write_optional_bytes(w: Writer, value: bytes | None) -> None:
    if value is None:
        w.u8(0)
    else:
        w.u8(1)
        w.bytes_(value)


def _read_optional_bytes(r: Reader, expected_len: int) -> bytes | None:
    flag = r.u8()
    if flag == 0:
        return None
    if flag != 1:
        raise DecodeError(f"bad optional flag {flag}")
    return r.fixed_bytes(expected_len)


def encode_state(state: ChainState) -> bytes:
    w = Writer()

    w.count(len(state.accounts))
    for addr in sorted(state.accounts):
        acct = state.accounts[addr]
        w.bytes_(addr).u64(acct.balance).u64(acct.nonce)

    w.count(len(state.auctions))
    for aid in sorted(state.auctions):
        a = state.auctions[aid]
        w.bytes_(a.id).bytes_(a.seller).bytes_(a.lot_id)
        w.u64(a.base_price).u64(a.min_increment).u64(a.deadline_height)
        w.u8(a.mode)
        if a.best_bid is None:
            w.u8(0)
        else:
            w.u8(1)
            w.bytes_(a.best_bid.bidder).u64(a.best_bid.amount).u64(a.best_bid.escrowed)
        w.u8(a.status)

    w.count(len(state.lots))
    for lid in sorted(state.lots):
        lot = state.lots[lid]
        w.bytes_(lot.id).u64(lot.kwh).bytes_(lot.origin).bytes_(lot.owner)
        _write_optional_bytes(w, lot.locked_in)

    w.count(len(state.bonds))
    for bid_ in sorted(state.bonds):
        b = state.bonds[bid_]
        w.bytes_(b.id).u64(b.face_value).bytes_(b.issuer).bytes_(b.holder)
        w.u64(b.maturity_height).u8(b.state)

    w.count(len(state.qualified))
    for addr in sorted(state.qualified):
        w.bytes_(addr)

    p = state.params
    w.u64(p.gas_fee).u64(p.default_min_increment).u64(p.default_auction_duration)
    w.u64(p.bond_maturity_delta)
    w.count(len(p.authority_account.members))
    for m in p.authority_account.members:
        w.bytes_(m)
    w.u64(p.authority_account.threshold)
    w.count(len(p.authorities))
    for a in p.authorities:
        w.bytes_(a)
    w.u64(p.block_interval_ticks)

    return w.getvalue()


def decode_state(data: bytes) -> ChainState:
    r = Reader(data)

    accounts: dict[bytes, Account] = {}
    for _ in range(r.count()):
        addr = r.fixed_bytes(ADDRESS_LEN)
        accounts[addr] = Account(balance=r.u64(), nonce=r.u64())

    auctions: dict[bytes, Auction] = {}
    for _ in range(r.count()):
        aid = r.fixed_bytes(DIGEST_LEN)
        seller = r.fixed_bytes(ADDRESS_LEN)
        lot_id = r.fixed_bytes(DIGEST_LEN)
        base = r.u64()
        incr = r.u64()
        deadline = r.u64()
        mode = SettlementMode(r.u8())
        best_bid = None
        flag = r.u8()
        if flag == 1:
            best_bid = Bid(bidder=r.fixed_bytes(ADDRESS_LEN), amount=r.u64(), escrowed=r.u64())
        elif flag != 0:
            raise DecodeError(f"bad optional flag {flag}")
        status = AuctionStatus(r.u8())
        auctions[aid] = Auction(
            id=aid, seller=seller, lot_id=lot_id, base_price=base,
            min_increment=incr, deadline_height=deadline, mode=mode,
            best_bid=best_bid, status=status,
        )

    lots: dict[bytes, EnergyLot] = {}
    for _ in range(r.count()):
        lid = r.fixed_bytes(DIGEST_LEN)
        kwh = r.u64()
        origin = r.fixed_bytes(ADDRESS_LEN)
        owner = r.fixed_bytes(ADDRESS_LEN)
        locked = _read_optional_bytes(r, DIGEST_LEN)
        lots[lid] = EnergyLot(id=lid, kwh=kwh, origin=origin, owner=owner, locked_in=locked)

    bonds: dict[bytes, Bond] = {}
    for _ in range(r.count()):
        bid_ = r.fixed_bytes(DIGEST_LEN)
        bonds[bid_] = Bond(
            id=bid_,
            face_value=r.u64(),
            issuer=r.fixed_bytes(ADDRESS_LEN),
            holder=r.fixed_bytes(ADDRESS_LEN),
            maturity_height=r.u64(),
            state=BondState(r.u8()),
        )

    qualified = frozenset(r.fixed_bytes(ADDRESS_LEN) for _ in range(r.count()))

    gas = r.u64()
    min_incr = r.u64()
    duration = r.u64()
    maturity_delta = r.u64()
    members = tuple(r.fixed_bytes(ADDRESS_LEN) for _ in range(r.count()))
    threshold = r.u64()
    authorities = tuple(r.fixed_bytes(ADDRESS_LEN) for _ in range(r.count()))
    interval = r.u64()
    r.finish()

    params = ProtocolParams(
        gas_fee=gas,
        default_min_increment=min_incr,
        default_auction_duration=duration,
        bond_maturity_delta=maturity_delta,
        authority_account=MultisigAccount(members=members, threshold=threshold),
        authorities=authorities,
        block_interval_ticks=interval,
    )
    return ChainState(
        accounts=accounts, auctions=auctions, lots=lots, bonds=bonds,
        qualified=qualified, params=params,
    )


# --- identity hashes ---------------------------------------------------------


def tx_id(stx: SignedTransaction) -> bytes:
    """Digest of the unsigned transaction; stable across re-signing."""
    return sha256(encode_transaction(stx.tx))


def unsigned_tx_id(tx: Transaction) -> bytes:
    return sha256(encode_transaction(tx))


def header_hash(header: BlockHeader) -> bytes:
    return sha256(encode_header(header))


def block_hash(block: Block) -> bytes:
    return header_hash(block.header)


def compute_state_root(state: ChainState) -> bytes:
    """Order-insensitive digest of the full chain state."""
    return sha256(encode_state(state))


def bond_id_for_auction(auction_id: bytes) -> bytes:
    return sha256(auction_id + b"bond")
