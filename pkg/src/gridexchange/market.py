"""Off-chain matching: demand intents, greedy bid recommendation, and
satisfaction metrics computed from chain receipts.

Matching is greedy price-priority: auctions rank by their current bid floor,
buyers by willingness to pay, and every buyer takes the cheapest remaining
auction that covers their energy need.  Deterministic and permutation-proof
via total sort keys; optimality is measured against an oracle in the test
suite, not claimed here.
"""

import csv
import io
from dataclasses import dataclass
from typing import Mapping, Sequence

from .model import (
    Auction,
    AuctionStatus,
    EnergyLot,
    EventKind,
    ProtocolParams,
    Receipt,
)


class AuctionClosedError(ValueError):
    """Raised when a bid floor is requested for a non-open auction."""


@dataclass(frozen=True)
class DemandIntent:
    """One buyer's standing wish: up to ``max_price`` for ``kwh_needed``."""

    buyer: bytes
    kwh_needed: int
    max_price: int
    active: bool = True


@dataclass(frozen=True)
class Assignment:
    intent: DemandIntent
    auction_id: bytes
    suggested_bid: int


@dataclass(frozen=True)
class MatchPlan:
    assignments: tuple[Assignment, ...]

    def to_json(self) -> list[dict]:
        return [
            {
                "buyer": a.intent.buyer.hex(),
                "auction_id": a.auction_id.hex(),
                "suggested_bid": a.suggested_bid,
            }
            for a in self.assignments
        ]


def next_valid_bid(auction: Auction) -> int:
    """Smallest amount exec_place_bid would accept right now."""
    if auction.status != AuctionStatus.OPEN:
        raise AuctionClosedError(f"auction {auction.id.hex()} is not open")
    if auction.best_bid is None:
        return auction.base_price
    return auction.best_bid.amount + auction.min_increment


def recommend_bids(
    open_auctions: Sequence[Auction],
    lots: Mapping[bytes, EnergyLot],
    intents: Sequence[DemandIntent],
) -> MatchPlan:
    """Greedy assignment of buyers to auctions.

    Auctions sort by bid floor ascending (ties: id bytes); active intents by
    max_price descending (ties: buyer bytes).  Each intent takes the cheapest
    unassigned auction whose lot covers its kWh need at an affordable floor;
    each auction is suggested to at most one buyer.
    """
    candidates = []
    for auction in open_auctions:
        if auction.status != AuctionStatus.OPEN:
            continue
        lot = lots.get(auction.lot_id)
        if lot is None:
            continue
        candidates.append((next_valid_bid(auction), auction.id, lot.kwh))
    candidates.sort(key=lambda c: (c[0], c[1]))

    ranked = sorted(
        (i for i in intents if i.active),
        key=lambda i: (-i.max_price, i.buyer),
    )

    taken: set[bytes] = set()
    assignments = []
    for intent in ranked:
        for floor, auction_id, kwh in candidates:
            if auction_id in taken:
                continue
            if kwh < intent.kwh_needed or floor > intent.max_price:
                continue
            taken.add(auction_id)
            assignments.append(
                Assignment(intent=intent, auction_id=auction_id, suggested_bid=floor)
            )
            break
    return MatchPlan(assignments=tuple(assignments))


# --- satisfaction reporting ---------------------------------------------------


@dataclass
class BuyerOutcome:
    buyer: bytes
    max_price: int
    matched: bool
    price_paid: int | None
    surplus: int


@dataclass
class SellerOutcome:
    """One seller-side auction outcome; a seller appears once per auction."""

    seller: bytes
    auction_id: bytes
    outcome: str  # "settled" | "discarded" | "open"
    base_price: int
    price: int | None
    surplus: int


@dataclass
class SatisfactionReport:
    buyers: list[BuyerOutcome]
    sellers: list[SellerOutcome]
    buyer_surplus_total: int
    seller_surplus_total: int
    match_rate: float
    mean_clearing_price: float
    settled_count: int
    discarded_count: int

    def to_json(self) -> dict:
        return {
            "buyers": [
                {
                    "buyer": b.buyer.hex(),
                    "max_price": b.max_price,
                    "matched": b.matched,
                    "price_paid": b.price_paid,
                    "surplus": b.surplus,
                }
                for b in self.buyers
            ],
            "sellers": [
                {
                    "seller": s.seller.hex(),
                    "auction_id": s.auction_id.hex(),
                    "outcome": s.outcome,
                    "base_price": s.base_price,
                    "price": s.price,
                    "surplus": s.surplus,
                }
                for s in self.sellers
            ],
            "totals": {
                "buyer_surplus": self.buyer_surplus_total,
                "seller_surplus": self.seller_surplus_total,
                "match_rate": self.match_rate,
                "mean_clearing_price": self.mean_clearing_price,
                "settled": self.settled_count,
                "discarded": self.discarded_count,
            },
        }


def compute_satisfaction(
    receipts: Sequence[Sequence[Receipt]],
    intents: Sequence[DemandIntent],
    params: ProtocolParams,
) -> SatisfactionReport:
    """Surplus accounting over settled receipts.

    Buyer surplus is max_price minus price paid per intent (0 if unmatched);
    a buyer with several intents absorbs their wins in chain order.  Seller
    surplus is price minus base price per settled auction and -gas_fee per
    discarded one; still-open auctions appear with zero surplus and stay out
    of the aggregates.
    """
    opened: dict[bytes, dict] = {}
    settled: dict[bytes, dict] = {}
    discarded: list[bytes] = []
    for per_height in receipts:
        for receipt in per_height:
            for event in receipt.events:
                if event.kind == EventKind.AUCTION_OPENED:
                    opened[bytes.fromhex(event.data["auction_id"])] = event.data
                elif event.kind == EventKind.AUCTION_SETTLED:
                    settled[bytes.fromhex(event.data["auction_id"])] = event.data
                elif event.kind == EventKind.AUCTION_DISCARDED:
                    discarded.append(bytes.fromhex(event.data["auction_id"]))

    wins_by_buyer: dict[bytes, list[int]] = {}
    for auction_id, data in settled.items():
        wins_by_buyer.setdefault(bytes.fromhex(data["winner"]), []).append(data["price"])

    buyers = []
    consumed: dict[bytes, int] = {}
    for intent in intents:
        wins = wins_by_buyer.get(intent.buyer, [])
        index = consumed.get(intent.buyer, 0)
        if intent.active and index < len(wins):
            price = wins[index]
            consumed[intent.buyer] = index + 1
            buyers.append(
                BuyerOutcome(
                    buyer=intent.buyer,
                    max_price=intent.max_price,
                    matched=True,
                    price_paid=price,
                    surplus=intent.max_price - price,
                )
            )
        else:
            buyers.append(
                BuyerOutcome(
                    buyer=intent.buyer,
                    max_price=intent.max_price,
                    matched=False,
                    price_paid=None,
                    surplus=0,
                )
            )

    sellers = []
    for auction_id, data in sorted(opened.items()):
        seller = bytes.fromhex(data["seller"])
        base_price = data["base_price"]
        if auction_id in settled:
            price = settled[auction_id]["price"]
            sellers.append(
                SellerOutcome(
                    seller=seller,
                    auction_id=auction_id,
                    outcome="settled",
                    base_price=base_price,
                    price=price,
                    surplus=price - base_price,
                )
            )
        elif auction_id in discarded:
            sellers.append(
                SellerOutcome(
                    seller=seller,
                    auction_id=auction_id,
                    outcome="discarded",
                    base_price=base_price,
                    price=None,
                    surplus=-params.gas_fee,
                )
            )
        else:
            sellers.append(
                SellerOutcome(
                    seller=seller,
                    auction_id=auction_id,
                    outcome="open",
                    base_price=base_price,
                    price=None,
                    surplus=0,
                )
            )

    active_count = sum(1 for i in intents if i.active)
    matched_count = sum(1 for b in buyers if b.matched)
    prices = [data["price"] for data in settled.values()]
    return SatisfactionReport(
        buyers=buyers,
        sellers=sellers,
        buyer_surplus_total=sum(b.surplus for b in buyers),
        seller_surplus_total=sum(s.surplus for s in sellers),
        match_rate=matched_count / active_count if active_count else 0.0,
        mean_clearing_price=sum(prices) / len(prices) if prices else 0.0,
        settled_count=len(settled),
        discarded_count=len(discarded),
    )


def satisfaction_csv(report: "SatisfactionReport | dict") -> str:
    """Flat CSV, one row per participant-side outcome.

    Accepts either the report object or its JSON form, so it also works on
    reports loaded back from disk.
    """
    doc = report.to_json() if isinstance(report, SatisfactionReport) else report
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["role", "address", "auction_id", "outcome", "limit", "price", "surplus"])
    for b in doc["buyers"]:
        writer.writerow(
            [
                "buyer",
                b["buyer"],
                "",
                "matched" if b["matched"] else "unmatched",
                b["max_price"],
                "" if b["price_paid"] is None else b["price_paid"],
                b["surplus"],
            ]
        )
    for s in doc["sellers"]:
        writer.writerow(
            [
                "seller",
                s["seller"],
                s["auction_id"],
                s["outcome"],
                s["base_price"],
                "" if s["price"] is None else s["price"],
                s["surplus"],
            ]
        )
    return buf.getvalue()


def intent_from_json(doc: dict) -> DemandIntent:
    buyer = bytes.fromhex(doc["buyer"])
    kwh = int(doc["kwh_needed"])
    max_price = int(doc["max_price"])
    if kwh < 1 or max_price < 1:
        raise ValueError("intent needs kwh_needed >= 1 and max_price >= 1")
    return DemandIntent(
        buyer=buyer,
        kwh_needed=kwh,
        max_price=max_price,
        active=bool(doc.get("active", True)),
    )
