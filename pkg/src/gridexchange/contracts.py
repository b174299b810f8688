"""Kind-specific transaction semantics: the energy transfer contract.

Each ``exec_*`` function checks its preconditions in the ledger's fixed
order (qualification, then funds/ownership, then kind rules) and applies
the transition to a state clone owned by the caller, returning either a
:class:`Reject` reason or the list of emitted events.

Settlement is automatic: ``finalize_due_auctions`` runs after every block's
transactions and either settles to the highest bidder or discards a bid-less
auction, returning the lot to its seller with the gas fee kept.
"""

from dataclasses import replace

from .model import (
    Auction,
    AuctionStatus,
    Bid,
    Bond,
    BondState,
    ChainState,
    EnergyLot,
    Event,
    EventKind,
    MintLot,
    OpenAuction,
    PlaceBid,
    RedeemBond,
    RegistryUpdate,
    Reject,
    SettlementMode,
    Transaction,
    Transfer,
    TransferBond,
    TransferLot,
    bond_id_for_auction,
    unsigned_tx_id,
)

ExecResult = Reject | list[Event]

# Caps deadline and maturity arithmetic well inside the u64 encoding range.
MAX_AUCTION_DURATION = 1 << 32


def _credit(state: ChainState, address: bytes, amount: int) -> None:
    acct = state.account(address)
    state.accounts[address] = replace(acct, balance=acct.balance + amount)


def _debit(state: ChainState, address: bytes, amount: int) -> None:
    acct = state.account(address)
    if acct.balance < amount:
        raise AssertionError("debit past zero; caller must check funds first")
    state.accounts[address] = replace(acct, balance=acct.balance - amount)


def _hex(b: bytes) -> str:
    return b.hex()


def execute(
    state: ChainState,
    tx: Transaction,
    height: int,
    producer: bytes,
) -> ExecResult:
    """Run stages 3..5 of validation (signature and nonce already checked)
    and apply the transition.  ``state`` must be a clone the caller owns."""
    payload = tx.payload
    if isinstance(payload, Transfer):
        return exec_transfer(state, tx.sender, payload)
    if isinstance(payload, OpenAuction):
        return exec_open_auction(state, tx.sender, payload, unsigned_tx_id(tx), height, producer)
    if isinstance(payload, PlaceBid):
        return exec_place_bid(state, tx.sender, payload, height)
    if isinstance(payload, MintLot):
        return exec_mint_lot(state, tx.sender, payload, unsigned_tx_id(tx))
    if isinstance(payload, TransferLot):
        return exec_transfer_lot(state, tx.sender, payload)
    if isinstance(payload, TransferBond):
        return exec_transfer_bond(state, tx.sender, payload)
    if isinstance(payload, RedeemBond):
        return exec_redeem_bond(state, tx.sender, payload, height)
    if isinstance(payload, RegistryUpdate):
        return exec_registry_update(state, payload)
    raise TypeError(f"unknown payload: {type(payload)!r}")


def exec_transfer(state: ChainState, sender: bytes, p: Transfer) -> ExecResult:
    if state.account(sender).balance < p.amount:
        return Reject.INSUFFICIENT_FUNDS
    _debit(state, sender, p.amount)
    _credit(state, p.to, p.amount)
    return []


def exec_open_auction(
    state: ChainState,
    seller: bytes,
    p: OpenAuction,
    auction_id: bytes,
    height: int,
    producer: bytes,
) -> ExecResult:
    if seller not in state.qualified:
        return Reject.NOT_QUALIFIED
    lot = state.lots.get(p.lot_id)
    if lot is None:
        return Reject.UNKNOWN_LOT
    if lot.owner != seller:
        return Reject.NOT_OWNER
    if lot.locked_in is not None:
        return Reject.LOT_LOCKED
    gas = state.params.gas_fee
    if state.account(seller).balance < gas:
        return Reject.INSUFFICIENT_FUNDS
    if p.base_price < 1 or p.min_increment < 1:
        return Reject.BAD_PARAMS
    if not 1 <= p.duration_blocks <= MAX_AUCTION_DURATION:
        return Reject.BAD_PARAMS

    # Gas moves to whoever produced the including block, never refunded.
    _debit(state, seller, gas)
    _credit(state, producer, gas)

    deadline = height + p.duration_blocks
    auction = Auction(
        id=auction_id,
        seller=seller,
        lot_id=p.lot_id,
        base_price=p.base_price,
        min_increment=p.min_increment,
        deadline_height=deadline,
        mode=p.mode,
        best_bid=None,
        status=AuctionStatus.OPEN,
    )
    state.auctions[auction_id] = auction
    state.lots[p.lot_id] = replace(lot, locked_in=auction_id)
    return [
        Event(
            EventKind.AUCTION_OPENED,
            {
                "auction_id": _hex(auction_id),
                "seller": _hex(seller),
                "lot_id": _hex(p.lot_id),
                "base_price": p.base_price,
                "min_increment": p.min_increment,
                "deadline_height": deadline,
                "mode": "bond" if p.mode == SettlementMode.BOND_ALLOWED else "cash",
            },
        )
    ]


def exec_place_bid(state: ChainState, bidder: bytes, p: PlaceBid, height: int) -> ExecResult:
    if bidder not in state.qualified:
        return Reject.NOT_QUALIFIED
    if state.account(bidder).balance < p.amount:
        return Reject.INSUFFICIENT_FUNDS
    auction = state.auctions.get(p.auction_id)
    if auction is None:
        return Reject.UNKNOWN_AUCTION
    if auction.status != AuctionStatus.OPEN or height >= auction.deadline_height:
        return Reject.AUCTION_CLOSED
    if bidder == auction.seller:
        return Reject.SELF_BID
    if p.amount < auction.base_price:
        return Reject.BID_TOO_LOW
    if auction.best_bid is not None and p.amount < auction.best_bid.amount + auction.min_increment:
        return Reject.BID_TOO_LOW

    events = []
    if auction.best_bid is not None:
        prev = auction.best_bid
        _credit(state, prev.bidder, prev.escrowed)
        events.append(
            Event(
                EventKind.BID_REFUNDED,
                {
                    "auction_id": _hex(auction.id),
                    "bidder": _hex(prev.bidder),
                    "amount": prev.escrowed,
                },
            )
        )
    _debit(state, bidder, p.amount)
    state.auctions[auction.id] = replace(
        auction, best_bid=Bid(bidder=bidder, amount=p.amount, escrowed=p.amount)
    )
    events.append(
        Event(
            EventKind.BID_ACCEPTED,
            {"auction_id": _hex(auction.id), "bidder": _hex(bidder), "amount": p.amount},
        )
    )
    return events


def exec_mint_lot(state: ChainState, producer_addr: bytes, p: MintLot, lot_id: bytes) -> ExecResult:
    if producer_addr not in state.qualified:
        return Reject.NOT_QUALIFIED
    if p.kwh < 1:
        return Reject.BAD_PARAMS
    state.lots[lot_id] = EnergyLot(
        id=lot_id, kwh=p.kwh, origin=producer_addr, owner=producer_addr, locked_in=None
    )
    return [
        Event(
            EventKind.LOT_MINTED,
            {"lot_id": _hex(lot_id), "origin": _hex(producer_addr), "kwh": p.kwh},
        )
    ]


def exec_transfer_lot(state: ChainState, sender: bytes, p: TransferLot) -> ExecResult:
    lot = state.lots.get(p.lot_id)
    if lot is None:
        return Reject.UNKNOWN_LOT
    if lot.owner != sender:
        return Reject.NOT_OWNER
    if lot.locked_in is not None:
        return Reject.LOT_LOCKED
    state.lots[p.lot_id] = replace(lot, owner=p.to)
    return [
        Event(
            EventKind.LOT_TRANSFERRED,
            {"lot_id": _hex(p.lot_id), "from": _hex(sender), "to": _hex(p.to)},
        )
    ]


def exec_transfer_bond(state: ChainState, sender: bytes, p: TransferBond) -> ExecResult:
    bond = state.bonds.get(p.bond_id)
    if bond is None:
        return Reject.UNKNOWN_BOND
    if bond.holder != sender:
        return Reject.NOT_HOLDER
    if bond.state != BondState.OUTSTANDING:
        return Reject.BOND_CLOSED
    state.bonds[p.bond_id] = replace(bond, holder=p.to)
    return [
        Event(
            EventKind.BOND_TRANSFERRED,
            {"bond_id": _hex(p.bond_id), "from": _hex(sender), "to": _hex(p.to)},
        )
    ]


def exec_redeem_bond(state: ChainState, sender: bytes, p: RedeemBond, height: int) -> ExecResult:
    bond = state.bonds.get(p.bond_id)
    if bond is None:
        return Reject.UNKNOWN_BOND
    if bond.holder != sender:
        return Reject.NOT_HOLDER
    if bond.state != BondState.OUTSTANDING:
        return Reject.BOND_CLOSED
    if height < bond.maturity_height:
        return Reject.NOT_MATURE

    issuer_balance = state.account(bond.issuer).balance
    if issuer_balance >= bond.face_value:
        _debit(state, bond.issuer, bond.face_value)
        _credit(state, bond.holder, bond.face_value)
        state.bonds[p.bond_id] = replace(bond, state=BondState.REDEEMED)
        kind = EventKind.BOND_REDEEMED
    else:
        # No partial payment: the bond closes worthless.
        state.bonds[p.bond_id] = replace(bond, state=BondState.DEFAULTED)
        kind = EventKind.BOND_DEFAULTED
    return [
        Event(
            kind,
            {
                "bond_id": _hex(p.bond_id),
                "issuer": _hex(bond.issuer),
                "holder": _hex(bond.holder),
                "face_value": bond.face_value,
            },
        )
    ]


def exec_registry_update(state: ChainState, p: RegistryUpdate) -> ExecResult:
    # Add first, then remove: an address listed in both ends up removed.
    qualified = (set(state.qualified) | set(p.add)) - set(p.remove)
    state.qualified = frozenset(qualified)
    return [
        Event(
            EventKind.REGISTRY_UPDATED,
            {
                "added": sorted(_hex(a) for a in p.add),
                "removed": sorted(_hex(a) for a in p.remove),
            },
        )
    ]


def settle(state: ChainState, auction: Auction, height: int) -> list[Event]:
    """Transfer escrow (or mint a bond) to the seller and the lot to the winner.

    Caller guarantees the auction is open, past deadline, and has a best bid.
    """
    bid = auction.best_bid
    assert bid is not None
    lot = state.lots[auction.lot_id]
    events: list[Event] = []

    if auction.mode == SettlementMode.CASH:
        _credit(state, auction.seller, bid.escrowed)
        mode = "cash"
        bond_hex = None
    else:
        # Bond settlement: the winner keeps their cash and owes a bond instead.
        _credit(state, bid.bidder, bid.escrowed)
        bond_id = bond_id_for_auction(auction.id)
        bond = Bond(
            id=bond_id,
            face_value=bid.amount,
            issuer=bid.bidder,
            holder=auction.seller,
            maturity_height=height + state.params.bond_maturity_delta,
            state=BondState.OUTSTANDING,
        )
        state.bonds[bond_id] = bond
        mode = "bond"
        bond_hex = _hex(bond_id)
        events.append(
            Event(
                EventKind.BOND_MINTED,
                {
                    "bond_id": bond_hex,
                    "auction_id": _hex(auction.id),
                    "face_value": bid.amount,
                    "issuer": _hex(bid.bidder),
                    "holder": _hex(auction.seller),
                    "maturity_height": bond.maturity_height,
                },
            )
        )

    state.lots[auction.lot_id] = replace(lot, owner=bid.bidder, locked_in=None)
    state.auctions[auction.id] = replace(
        auction, best_bid=replace(bid, escrowed=0), status=AuctionStatus.SETTLED
    )
    settled = {
        "auction_id": _hex(auction.id),
        "seller": _hex(auction.seller),
        "winner": _hex(bid.bidder),
        "price": bid.amount,
        "lot_id": _hex(auction.lot_id),
        "mode": mode,
    }
    if bond_hex is not None:
        settled["bond_id"] = bond_hex
    events.append(Event(EventKind.AUCTION_SETTLED, settled))
    return events


def finalize_due_auctions(state: ChainState, height: int) -> list[tuple[bytes, list[Event]]]:
    """Finalize every open auction whose deadline has arrived.

    Runs once per applied block, after its transactions.  Auctions sharing a
    deadline finalize in ascending id byte order so replays agree everywhere.
    Returns (auction_id, events) pairs, one per finalized auction.
    """
    due = sorted(
        aid
        for aid, a in state.auctions.items()
        if a.status == AuctionStatus.OPEN and a.deadline_height <= height
    )
    out: list[tuple[bytes, list[Event]]] = []
    for aid in due:
        auction = state.auctions[aid]
        if auction.best_bid is None:
            # No takers: unlock the lot, keep the gas fee, publish nothing.
            lot = state.lots[auction.lot_id]
            state.lots[auction.lot_id] = replace(lot, locked_in=None)
            state.auctions[aid] = replace(auction, status=AuctionStatus.DISCARDED)
            events = [
                Event(
                    EventKind.AUCTION_DISCARDED,
                    {
                        "auction_id": _hex(aid),
                        "seller": _hex(auction.seller),
                        "lot_id": _hex(auction.lot_id),
                    },
                )
            ]
        else:
            events = settle(state, auction, height)
        out.append((aid, events))
    return out
