"""Transaction semantics: auction lifecycle, escrow, bonds, registry.

Most cases drive ``execute`` directly on a cloned state; integration with
nonces, receipts and block production is covered in test_chain.
"""

import pytest

from gridexchange.contracts import MAX_AUCTION_DURATION, execute, finalize_due_auctions
from gridexchange.model import (
    AuctionStatus,
    BondState,
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
    total_funds,
    unsigned_tx_id,
)

PRODUCER_TAG = "alice"


def run(bench, state, sender, payload, height=1, nonce=0):
    """Execute one payload; returns (result, tx id)."""
    tx = Transaction(bench.address(sender), nonce, payload)
    result = execute(state, tx, height, bench.address(PRODUCER_TAG))
    return result, unsigned_tx_id(tx)


def mint(bench, state, owner="alice", kwh=40, nonce=0):
    result, lot_id = run(bench, state, owner, MintLot(kwh=kwh), nonce=nonce)
    assert isinstance(result, list)
    return lot_id


def open_auction(bench, state, lot_id, seller="alice", height=1, nonce=1, **kw):
    payload = OpenAuction(
        lot_id=lot_id,
        base_price=kw.get("base_price", 10),
        min_increment=kw.get("min_increment", 2),
        duration_blocks=kw.get("duration_blocks", 5),
        mode=kw.get("mode", SettlementMode.CASH),
    )
    result, auction_id = run(bench, state, seller, payload, height=height, nonce=nonce)
    assert isinstance(result, list), result
    return auction_id


# -- transfer ------------------------------------------------------------------


def test_transfer_moves_funds(bench):
    state = bench.genesis_state.clone()
    result, _ = run(bench, state, "alice", Transfer(to=bench.address("bob"), amount=250))
    assert result == []
    assert state.account(bench.address("alice")).balance == 9_750
    assert state.account(bench.address("bob")).balance == 10_250


def test_transfer_overdraft_rejected(bench):
    state = bench.genesis_state.clone()
    result, _ = run(bench, state, "alice", Transfer(to=bench.address("bob"), amount=10_001))
    assert result == Reject.INSUFFICIENT_FUNDS
    assert state.account(bench.address("alice")).balance == 10_000


def test_transfer_to_unknown_account_creates_it(bench):
    state = bench.genesis_state.clone()
    stranger = b"\x99" * 20
    result, _ = run(bench, state, "alice", Transfer(to=stranger, amount=5))
    assert result == []
    assert state.account(stranger).balance == 5


# -- mint ----------------------------------------------------------------------


def test_mint_requires_qualification(bench):
    state = bench.genesis_state.clone()
    state.qualified = state.qualified - {bench.address("bob")}
    result, _ = run(bench, state, "bob", MintLot(kwh=10))
    assert result == Reject.NOT_QUALIFIED


def test_mint_rejects_zero_kwh(bench):
    state = bench.genesis_state.clone()
    result, _ = run(bench, state, "alice", MintLot(kwh=0))
    assert result == Reject.BAD_PARAMS


def test_mint_creates_owned_lot(bench):
    state = bench.genesis_state.clone()
    lot_id = mint(bench, state, "carol", kwh=17)
    lot = state.lots[lot_id]
    assert (lot.kwh, lot.origin, lot.owner, lot.locked_in) == (
        17,
        bench.address("carol"),
        bench.address("carol"),
        None,
    )


# -- open auction -----------------------------------------------------------------


def test_open_auction_happy_path_charges_gas_to_producer(bench):
    state = bench.genesis_state.clone()
    lot_id = mint(bench, state, "bob")
    gas = state.params.gas_fee
    before_seller = state.account(bench.address("bob")).balance
    before_producer = state.account(bench.address("alice")).balance
    auction_id = open_auction(bench, state, lot_id, seller="bob", height=4, duration_blocks=6)
    auction = state.auctions[auction_id]
    assert auction.deadline_height == 10
    assert auction.status == AuctionStatus.OPEN
    assert state.lots[lot_id].locked_in == auction_id
    assert state.account(bench.address("bob")).balance == before_seller - gas
    assert state.account(bench.address("alice")).balance == before_producer + gas


def test_open_auction_rejection_order(bench):
    state = bench.genesis_state.clone()
    lot_id = mint(bench, state, "bob")

    state.qualified = state.qualified - {bench.address("carol")}
    r, _ = run(bench, state, "carol", OpenAuction(lot_id, 10, 1, 5, SettlementMode.CASH))
    assert r == Reject.NOT_QUALIFIED

    r, _ = run(bench, state, "carol", OpenAuction(b"\x01" * 32, 10, 1, 5, SettlementMode.CASH), nonce=1)
    assert r == Reject.NOT_QUALIFIED, "qualification outranks unknown lot"

    r, _ = run(bench, state, "alice", OpenAuction(b"\x01" * 32, 10, 1, 5, SettlementMode.CASH))
    assert r == Reject.UNKNOWN_LOT

    r, _ = run(bench, state, "alice", OpenAuction(lot_id, 10, 1, 5, SettlementMode.CASH), nonce=1)
    assert r == Reject.NOT_OWNER

    locked = open_auction(bench, state, lot_id, seller="bob")
    r, _ = run(bench, state, "bob", OpenAuction(lot_id, 10, 1, 5, SettlementMode.CASH), nonce=2)
    assert r == Reject.LOT_LOCKED
    assert locked in state.auctions


def test_open_auction_bad_params(bench):
    state = bench.genesis_state.clone()
    lot_id = mint(bench, state)
    for payload in (
        OpenAuction(lot_id, 0, 1, 5, SettlementMode.CASH),
        OpenAuction(lot_id, 10, 0, 5, SettlementMode.CASH),
        OpenAuction(lot_id, 10, 1, 0, SettlementMode.CASH),
        OpenAuction(lot_id, 10, 1, MAX_AUCTION_DURATION + 1, SettlementMode.CASH),
    ):
        r, _ = run(bench, state, "alice", payload, nonce=1)
        assert r == Reject.BAD_PARAMS
        assert state.lots[lot_id].locked_in is None, "rejection must not lock the lot"


def test_open_auction_needs_gas_money(bench):
    state = bench.genesis_state.clone()
    lot_id = mint(bench, state, "dave")
    poor = state.account(bench.address("dave"))
    state.accounts[bench.address("dave")] = type(poor)(balance=state.params.gas_fee - 1, nonce=0)
    r, _ = run(bench, state, "dave", OpenAuction(lot_id, 10, 1, 5, SettlementMode.CASH), nonce=1)
    assert r == Reject.INSUFFICIENT_FUNDS


# -- bidding --------------------------------------------------------------------


def test_bid_ladder_and_refunds(bench):
    state = bench.genesis_state.clone()
    supply = total_funds(state)
    lot_id = mint(bench, state)
    aid = open_auction(bench, state, lot_id, base_price=10, min_increment=2)

    r, _ = run(bench, state, "bob", PlaceBid(aid, 9))
    assert r == Reject.BID_TOO_LOW, "below base price"

    r, _ = run(bench, state, "bob", PlaceBid(aid, 10), nonce=1)
    assert isinstance(r, list)
    assert state.account(bench.address("bob")).balance == 9_990

    r, _ = run(bench, state, "carol", PlaceBid(aid, 11))
    assert r == Reject.BID_TOO_LOW, "needs best + increment"

    r, _ = run(bench, state, "carol", PlaceBid(aid, 12), nonce=1)
    assert isinstance(r, list)
    kinds = [e.kind for e in r]
    assert kinds == [EventKind.BID_REFUNDED, EventKind.BID_ACCEPTED]
    assert state.account(bench.address("bob")).balance == 10_000, "outbid escrow returned"
    assert state.account(bench.address("carol")).balance == 9_988
    assert state.auctions[aid].best_bid.amount == 12
    assert total_funds(state) == supply


def test_bid_rejections(bench):
    state = bench.genesis_state.clone()
    lot_id = mint(bench, state)
    aid = open_auction(bench, state, lot_id, base_price=10, duration_blocks=5, height=1)

    state.qualified = state.qualified - {bench.address("dave")}
    r, _ = run(bench, state, "dave", PlaceBid(aid, 20))
    assert r == Reject.NOT_QUALIFIED

    r, _ = run(bench, state, "bob", PlaceBid(aid, 10_001))
    assert r == Reject.INSUFFICIENT_FUNDS

    r, _ = run(bench, state, "bob", PlaceBid(b"\x02" * 32, 20), nonce=1)
    assert r == Reject.UNKNOWN_AUCTION

    r, _ = run(bench, state, "alice", PlaceBid(aid, 20), nonce=1)
    assert r == Reject.SELF_BID

    # At the deadline height the window is already shut.
    r, _ = run(bench, state, "bob", PlaceBid(aid, 20), height=6, nonce=1)
    assert r == Reject.AUCTION_CLOSED


def test_self_outbid_needs_fresh_funds(bench):
    """Raising your own bid requires the new amount in full; the old escrow
    is only refunded as part of accepting the raise."""
    state = bench.genesis_state.clone()
    lot_id = mint(bench, state)
    aid = open_auction(bench, state, lot_id, base_price=10, min_increment=1)

    r, _ = run(bench, state, "bob", PlaceBid(aid, 6_000))
    assert isinstance(r, list)
    # Balance 4_000 now; raising to 7_000 would need 7_000 liquid.
    r, _ = run(bench, state, "bob", PlaceBid(aid, 7_000), nonce=1)
    assert r == Reject.INSUFFICIENT_FUNDS

    r, _ = run(bench, state, "bob", PlaceBid(aid, 4_000), nonce=2)
    assert r == Reject.BID_TOO_LOW

    supply = total_funds(state)
    r, _ = run(bench, state, "bob", PlaceBid(aid, 3_999), nonce=3)
    assert r == Reject.BID_TOO_LOW
    assert total_funds(state) == supply


# -- settlement ------------------------------------------------------------------


def test_cash_settlement(bench):
    state = bench.genesis_state.clone()
    supply = total_funds(state)
    lot_id = mint(bench, state, "bob")
    aid = open_auction(bench, state, lot_id, seller="bob", height=1, duration_blocks=3)
    r, _ = run(bench, state, "carol", PlaceBid(aid, 15))
    assert isinstance(r, list)

    assert finalize_due_auctions(state, 3) == []
    done = finalize_due_auctions(state, 4)
    assert [aid_ for aid_, _ in done] == [aid]
    kinds = [e.kind for e in done[0][1]]
    assert kinds == [EventKind.AUCTION_SETTLED]

    auction = state.auctions[aid]
    assert auction.status == AuctionStatus.SETTLED
    assert auction.best_bid.escrowed == 0
    lot = state.lots[lot_id]
    assert lot.owner == bench.address("carol")
    assert lot.locked_in is None
    gas = state.params.gas_fee
    assert state.account(bench.address("bob")).balance == 10_000 - gas + 15
    assert state.account(bench.address("carol")).balance == 10_000 - 15
    assert total_funds(state) == supply


def test_bond_settlement_mints_bond_and_returns_cash(bench):
    state = bench.genesis_state.clone()
    supply = total_funds(state)
    lot_id = mint(bench, state, "bob")
    aid = open_auction(
        bench, state, lot_id, seller="bob", height=1, duration_blocks=3,
        mode=SettlementMode.BOND_ALLOWED,
    )
    r, _ = run(bench, state, "carol", PlaceBid(aid, 20))
    assert isinstance(r, list)

    done = finalize_due_auctions(state, 4)
    kinds = [e.kind for e in done[0][1]]
    assert kinds == [EventKind.BOND_MINTED, EventKind.AUCTION_SETTLED]

    bond = state.bonds[bond_id_for_auction(aid)]
    assert bond.face_value == 20
    assert bond.issuer == bench.address("carol")
    assert bond.holder == bench.address("bob")
    assert bond.maturity_height == 4 + state.params.bond_maturity_delta
    assert bond.state == BondState.OUTSTANDING
    # Winner keeps cash; the seller holds paper instead.
    assert state.account(bench.address("carol")).balance == 10_000
    assert state.account(bench.address("bob")).balance == 10_000 - state.params.gas_fee
    assert state.lots[lot_id].owner == bench.address("carol")
    assert total_funds(state) == supply


def test_no_bid_discard(bench):
    state = bench.genesis_state.clone()
    supply = total_funds(state)
    lot_id = mint(bench, state, "bob")
    aid = open_auction(bench, state, lot_id, seller="bob", height=1, duration_blocks=2)

    done = finalize_due_auctions(state, 3)
    assert [e.kind for e in done[0][1]] == [EventKind.AUCTION_DISCARDED]
    assert state.auctions[aid].status == AuctionStatus.DISCARDED
    lot = state.lots[lot_id]
    assert lot.owner == bench.address("bob") and lot.locked_in is None
    gas = state.params.gas_fee
    assert state.account(bench.address("bob")).balance == 10_000 - gas
    assert state.account(bench.address("alice")).balance == 10_000 + gas
    assert total_funds(state) == supply


def test_finalize_orders_by_auction_id(bench):
    state = bench.genesis_state.clone()
    ids = []
    for i, seller in enumerate(("alice", "bob", "carol")):
        lot_id = mint(bench, state, seller, nonce=0 if seller != "alice" else 0)
        ids.append(open_auction(bench, state, lot_id, seller=seller, height=1, duration_blocks=2, nonce=1))
    done = finalize_due_auctions(state, 3)
    assert [aid for aid, _ in done] == sorted(ids)


def test_single_bidder_settles_at_own_bid(bench):
    state = bench.genesis_state.clone()
    lot_id = mint(bench, state)
    aid = open_auction(bench, state, lot_id, base_price=10, height=1, duration_blocks=2)
    r, _ = run(bench, state, "bob", PlaceBid(aid, 10))
    assert isinstance(r, list)
    done = finalize_due_auctions(state, 3)
    settled = done[0][1][-1]
    assert settled.data["price"] == 10
    assert settled.data["winner"] == bench.address("bob").hex()


# -- bonds -----------------------------------------------------------------------


def _settled_bond(bench, state, face=20):
    lot_id = mint(bench, state, "bob")
    aid = open_auction(
        bench, state, lot_id, seller="bob", height=1, duration_blocks=2,
        mode=SettlementMode.BOND_ALLOWED,
    )
    r, _ = run(bench, state, "carol", PlaceBid(aid, face))
    assert isinstance(r, list)
    finalize_due_auctions(state, 3)
    return bond_id_for_auction(aid)


def test_redeem_before_maturity_rejected(bench):
    state = bench.genesis_state.clone()
    bond_id = _settled_bond(bench, state)
    maturity = state.bonds[bond_id].maturity_height
    r, _ = run(bench, state, "bob", RedeemBond(bond_id), height=maturity - 1)
    assert r == Reject.NOT_MATURE
    r, _ = run(bench, state, "bob", RedeemBond(bond_id), height=maturity, nonce=1)
    assert isinstance(r, list)
    assert r[0].kind == EventKind.BOND_REDEEMED


def test_redeem_moves_face_value_once(bench):
    state = bench.genesis_state.clone()
    supply = total_funds(state)
    bond_id = _settled_bond(bench, state, face=500)
    maturity = state.bonds[bond_id].maturity_height
    r, _ = run(bench, state, "bob", RedeemBond(bond_id), height=maturity)
    assert isinstance(r, list)
    assert state.bonds[bond_id].state == BondState.REDEEMED
    assert state.account(bench.address("carol")).balance == 10_000 - 500
    assert state.account(bench.address("bob")).balance == 10_000 - state.params.gas_fee + 500
    # Closed bonds cannot pay twice or move.
    r, _ = run(bench, state, "bob", RedeemBond(bond_id), height=maturity + 1, nonce=1)
    assert r == Reject.BOND_CLOSED
    r, _ = run(bench, state, "bob", TransferBond(to=bench.address("dave"), bond_id=bond_id), nonce=2)
    assert r == Reject.BOND_CLOSED
    assert total_funds(state) == supply


def test_default_when_issuer_cannot_pay(bench):
    state = bench.genesis_state.clone()
    bond_id = _settled_bond(bench, state, face=9_000)
    maturity = state.bonds[bond_id].maturity_height
    # Issuer burns their balance below face value before maturity.
    r, _ = run(bench, state, "carol", Transfer(to=bench.address("dave"), amount=8_000), nonce=1)
    assert r == []
    holder_before = state.account(bench.address("bob")).balance
    r, _ = run(bench, state, "bob", RedeemBond(bond_id), height=maturity)
    assert isinstance(r, list)
    assert r[0].kind == EventKind.BOND_DEFAULTED
    assert state.bonds[bond_id].state == BondState.DEFAULTED
    # No partial payment at all.
    assert state.account(bench.address("bob")).balance == holder_before
    assert state.account(bench.address("carol")).balance == 2_000


def test_bond_transfer_chain_single_holder(bench):
    state = bench.genesis_state.clone()
    bond_id = _settled_bond(bench, state)
    r, _ = run(bench, state, "bob", TransferBond(to=bench.address("dave"), bond_id=bond_id))
    assert isinstance(r, list)
    assert state.bonds[bond_id].holder == bench.address("dave")
    # The old holder lost all rights.
    r, _ = run(bench, state, "bob", TransferBond(to=bench.address("alice"), bond_id=bond_id), nonce=1)
    assert r == Reject.NOT_HOLDER
    maturity = state.bonds[bond_id].maturity_height
    r, _ = run(bench, state, "bob", RedeemBond(bond_id), height=maturity, nonce=2)
    assert r == Reject.NOT_HOLDER
    r, _ = run(bench, state, "dave", RedeemBond(bond_id), height=maturity)
    assert isinstance(r, list)


def test_unknown_bond(bench):
    state = bench.genesis_state.clone()
    r, _ = run(bench, state, "bob", RedeemBond(b"\x00" * 32))
    assert r == Reject.UNKNOWN_BOND


# -- lots --------------------------------------------------------------------------


def test_lot_transfer_rules(bench):
    state = bench.genesis_state.clone()
    lot_id = mint(bench, state, "alice")
    r, _ = run(bench, state, "bob", TransferLot(to=bench.address("carol"), lot_id=lot_id))
    assert r == Reject.NOT_OWNER
    r, _ = run(bench, state, "alice", TransferLot(to=bench.address("carol"), lot_id=lot_id), nonce=1)
    assert isinstance(r, list)
    assert state.lots[lot_id].owner == bench.address("carol")
    aid = open_auction(bench, state, lot_id, seller="carol", nonce=0)
    r, _ = run(bench, state, "carol", TransferLot(to=bench.address("bob"), lot_id=lot_id), nonce=1)
    assert r == Reject.LOT_LOCKED
    assert state.lots[lot_id].locked_in == aid


# -- registry ------------------------------------------------------------------------


def test_registry_add_then_remove(bench):
    state = bench.genesis_state.clone()
    newcomer = b"\x42" * 20
    r = execute(
        state,
        Transaction(b"\x00" * 20, 0, RegistryUpdate(add=(newcomer,), remove=())),
        1,
        bench.address("alice"),
    )
    assert isinstance(r, list)
    assert newcomer in state.qualified

    # An address in both lists ends up removed.
    r = execute(
        state,
        Transaction(b"\x00" * 20, 1, RegistryUpdate(add=(newcomer,), remove=(newcomer,))),
        2,
        bench.address("alice"),
    )
    assert isinstance(r, list)
    assert newcomer not in state.qualified
