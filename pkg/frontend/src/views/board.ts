/**
 * Auction board: every auction the chain knows, open ones first, with a
 * bid form inline under the selected row.  Countdown and floor values are
 * rendered exactly as the API reported them; sorting just reorders rows.
 */

import { fmtMode, fmtStatus, shortHex } from "../format.js";
import type { SortKey, Store } from "../store.js";
import type { AuctionRow } from "../types.js";
import { el } from "./dom.js";

function sortRows(rows: AuctionRow[], key: SortKey): AuctionRow[] {
  const open = rows.filter((r) => r.status === "open");
  const closed = rows.filter((r) => r.status !== "open");
  open.sort((a, b) => {
    const left = key === "floor" ? a.next_valid_bid : a.blocks_remaining;
    const right = key === "floor" ? b.next_valid_bid : b.blocks_remaining;
    if (left !== right) return (left ?? 0) - (right ?? 0);
    return a.id < b.id ? -1 : 1;
  });
  closed.sort((a, b) => (a.id < b.id ? -1 : 1));
  return [...open, ...closed];
}

function bidFormRow(store: Store, row: AuctionRow): HTMLTableRowElement {
  const draft = store.state.bidDraft;
  if (draft === null) throw new Error("bid form without draft");
  const pending = draft.txId !== null;
  return el(
    "tr",
    { class: "bid-form-row" },
    el(
      "td",
      { colspan: "8" },
      el(
        "form",
        {
          class: "bid-form",
          onsubmit: (event) => {
            event.preventDefault();
            void store.submitBid();
          },
        },
        el("label", { for: "bid-amount" }, "Your bid"),
        el("input", {
          id: "bid-amount",
          "data-field": "bid-amount",
          type: "text",
          inputmode: "numeric",
          value: draft.amount,
          disabled: draft.busy || pending,
          oninput: (event) => store.setBidAmount((event.target as HTMLInputElement).value),
        }),
        el(
          "button",
          { type: "submit", "data-action": "submit-bid", disabled: draft.busy || pending },
          "Sign and submit",
        ),
        el(
          "button",
          { type: "button", "data-action": "cancel-bid", onclick: () => store.cancelBid() },
          "Cancel",
        ),
        pending ? el("span", { "data-role": "bid-pending", class: "pending" }, "waiting for receipt…") : null,
        draft.error !== null
          ? el("span", { "data-role": "bid-error", class: "error" }, draft.error)
          : null,
      ),
    ),
  );
}

function auctionRow(store: Store, row: AuctionRow): HTMLTableRowElement[] {
  const isOpen = row.status === "open";
  const canBid = isOpen && store.state.wallet !== null;
  const rows = [
    el(
      "tr",
      { "data-auction-id": row.id, class: isOpen ? "open" : "closed" },
      el("td", { title: row.id }, shortHex(row.id)),
      el("td", { "data-cell": "kwh" }, `${row.lot_kwh} kWh`),
      el("td", { "data-cell": "mode" }, fmtMode(row.mode)),
      el(
        "td",
        { "data-cell": "floor" },
        row.next_valid_bid !== null ? String(row.next_valid_bid) : "—",
      ),
      el(
        "td",
        { "data-cell": "best" },
        row.best_bid !== null
          ? `${row.best_bid.amount} (${shortHex(row.best_bid.bidder)})`
          : "no bids",
      ),
      el(
        "td",
        { "data-cell": "remaining" },
        row.blocks_remaining !== null ? `${row.blocks_remaining} blocks` : "—",
      ),
      el("td", { "data-cell": "status" }, fmtStatus(row.status)),
      el(
        "td",
        {},
        isOpen
          ? el(
              "button",
              {
                "data-action": "bid",
                disabled: !canBid,
                title: canBid ? "" : "select a wallet first",
                onclick: () => store.openBidForm(row.id),
              },
              "Bid",
            )
          : null,
      ),
    ),
  ];
  if (store.state.bidDraft?.auctionId === row.id) rows.push(bidFormRow(store, row));
  return rows;
}

export function renderBoard(store: Store): HTMLElement {
  const { auctions, sortKey } = store.state;
  if (auctions.length === 0) {
    return el(
      "section",
      { class: "board" },
      el(
        "p",
        { "data-role": "empty-board", class: "empty" },
        "No auctions yet. Offers appear here the moment a seller opens one.",
      ),
    );
  }
  const rows = sortRows(auctions, sortKey);
  return el(
    "section",
    { class: "board" },
    el(
      "div",
      { class: "board-controls" },
      el("label", { for: "sort" }, "Sort by"),
      el(
        "select",
        {
          id: "sort",
          "data-field": "sort",
          onchange: (event) =>
            store.setSort((event.target as HTMLSelectElement).value as SortKey),
        },
        el("option", { value: "floor", selected: sortKey === "floor" }, "floor price"),
        el("option", { value: "remaining", selected: sortKey === "remaining" }, "blocks remaining"),
      ),
    ),
    el(
      "table",
      { class: "board-table" },
      el(
        "thead",
        {},
        el(
          "tr",
          {},
          el("th", {}, "Auction"),
          el("th", {}, "Lot"),
          el("th", {}, "Mode"),
          el("th", {}, "Floor"),
          el("th", {}, "Best bid"),
          el("th", {}, "Time left"),
          el("th", {}, "Status"),
          el("th", {}, ""),
        ),
      ),
      el("tbody", {}, ...rows.flatMap((row) => auctionRow(store, row))),
    ),
  );
}
