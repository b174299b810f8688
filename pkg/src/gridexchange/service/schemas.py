"""Request/response bodies for the HTTP API.

Every binary field travels as lowercase hex without a prefix.  Unsigned
transactions arrive as JSON documents with a ``kind`` discriminator; the
builder here is the only place that turns them into payload objects, so
the CLI and the UI share one encoding path.
"""

from pydantic import BaseModel, ConfigDict, Field

from ..model import (
    MintLot,
    OpenAuction,
    Payload,
    PlaceBid,
    RedeemBond,
    RegistryUpdate,
    SettlementMode,
    Transfer,
    TransferBond,
    TransferLot,
)

MODE_NAMES = {SettlementMode.CASH: "cash", SettlementMode.BOND_ALLOWED: "bond"}
MODES_BY_NAME = {v: k for k, v in MODE_NAMES.items()}


class SchemaError(ValueError):
    """A transaction document that cannot be turned into a payload."""


def _addr(doc: dict, key: str) -> bytes:
    try:
        raw = bytes.fromhex(doc[key])
    except KeyError:
        raise SchemaError(f"missing field {key!r}") from None
    except (TypeError, ValueError):
        raise SchemaError(f"field {key!r} must be hex") from None
    if len(raw) != 20:
        raise SchemaError(f"field {key!r} must be a 20-byte address")
    return raw


def _digest(doc: dict, key: str) -> bytes:
    try:
        raw = bytes.fromhex(doc[key])
    except KeyError:
        raise SchemaError(f"missing field {key!r}") from None
    except (TypeError, ValueError):
        raise SchemaError(f"field {key!r} must be hex") from None
    if len(raw) != 32:
        raise SchemaError(f"field {key!r} must be a 32-byte id")
    return raw


def _amount(doc: dict, key: str) -> int:
    try:
        value = int(doc[key])
    except KeyError:
        raise SchemaError(f"missing field {key!r}") from None
    except (TypeError, ValueError):
        raise SchemaError(f"field {key!r} must be an integer") from None
    if value < 0 or value >= 1 << 64:
        raise SchemaError(f"field {key!r} out of range")
    return value


def payload_from_json(doc: dict, *, default_min_increment: int, default_auction_duration: int) -> Payload:
    """Build a transaction payload from its JSON form.

    Auction defaults come from chain parameters so clients can omit them.
    """
    kind = doc.get("kind")
    if kind == "transfer":
        return Transfer(to=_addr(doc, "to"), amount=_amount(doc, "amount"))
    if kind == "open_auction":
        mode_name = doc.get("mode", "cash")
        if mode_name not in MODES_BY_NAME:
            raise SchemaError(f"mode must be one of {sorted(MODES_BY_NAME)}")
        if "min_increment" not in doc:
            doc = {**doc, "min_increment": default_min_increment}
        if "duration_blocks" not in doc:
            doc = {**doc, "duration_blocks": default_auction_duration}
        return OpenAuction(
            lot_id=_digest(doc, "lot_id"),
            base_price=_amount(doc, "base_price"),
            min_increment=_amount(doc, "min_increment"),
            duration_blocks=_amount(doc, "duration_blocks"),
            mode=MODES_BY_NAME[mode_name],
        )
    if kind == "place_bid":
        return PlaceBid(auction_id=_digest(doc, "auction_id"), amount=_amount(doc, "amount"))
    if kind == "mint_lot":
        return MintLot(kwh=_amount(doc, "kwh"))
    if kind == "transfer_lot":
        return TransferLot(to=_addr(doc, "to"), lot_id=_digest(doc, "lot_id"))
    if kind == "transfer_bond":
        return TransferBond(to=_addr(doc, "to"), bond_id=_digest(doc, "bond_id"))
    if kind == "redeem_bond":
        return RedeemBond(bond_id=_digest(doc, "bond_id"))
    if kind == "registry_update":
        add = doc.get("add", [])
        remove = doc.get("remove", [])
        if not isinstance(add, list) or not isinstance(remove, list):
            raise SchemaError("add/remove must be address lists")
        return RegistryUpdate(
            add=tuple(_addr({"a": a}, "a") for a in add),
            remove=tuple(_addr({"a": a}, "a") for a in remove),
        )
    raise SchemaError(f"unknown transaction kind {kind!r}")


# -- responses -------------------------------------------------------------


class HeadOut(BaseModel):
    height: int
    hash: str
    state_root: str


class ReceiptOut(BaseModel):
    tx_id: str
    status: str
    reason: str | None
    events: list[dict]


class BlockOut(BaseModel):
    height: int
    hash: str
    prev_hash: str
    producer: str
    tick: int
    tx_ids: list[str]
    receipts: list[ReceiptOut]


class AccountOut(BaseModel):
    address: str
    balance: int
    nonce: int
    qualified: bool


class BestBidOut(BaseModel):
    bidder: str
    amount: int


class AuctionRowOut(BaseModel):
    id: str
    seller: str
    lot_id: str
    lot_kwh: int
    base_price: int
    min_increment: int
    deadline_height: int
    mode: str
    status: str
    best_bid: BestBidOut | None
    next_valid_bid: int | None
    blocks_remaining: int | None


class AuctionEventOut(BaseModel):
    height: int
    event: dict


class AuctionDetailOut(AuctionRowOut):
    history: list[AuctionEventOut]


class LotTraceOut(BaseModel):
    lot_id: str
    kwh: int
    owner: str
    locked_in: str | None
    events: list[dict]


class BondOut(BaseModel):
    id: str
    face_value: int
    issuer: str
    holder: str
    maturity_height: int
    state: str


class ParamsOut(BaseModel):
    gas_fee: int
    default_min_increment: int
    default_auction_duration: int
    bond_maturity_delta: int
    block_interval_ticks: int
    authorities: list[str]
    authority_members: list[str]
    authority_threshold: int
    genesis_supply: int


class WalletEntryOut(BaseModel):
    name: str
    address: str


class TxStatusOut(BaseModel):
    tx_id: str
    status: str
    height: int | None = None
    receipt: ReceiptOut | None = None


# -- requests --------------------------------------------------------------


class TxSubmitIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    hex: str = Field(min_length=2)


class TxSubmitOut(BaseModel):
    tx_id: str
    status: str


class SignIn(BaseModel):
    # The unsigned tx document is free-form; payload_from_json validates it.
    model_config = ConfigDict(extra="allow")

    kind: str
    nonce: int | None = None
    sender: str | None = None
    signers: list[str] | None = None


class SignOut(BaseModel):
    tx_id: str
    hex: str
    sender: str
    nonce: int


class ApiErrorOut(BaseModel):
    code: str
    message: str
