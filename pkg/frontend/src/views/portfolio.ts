/**
 * Portfolio: the selected wallet's balance, lots (with provenance
 * drill-down), and held bonds.  A bond's redeem button unlocks when the
 * chain head has reached its maturity height, both values as reported by
 * the node.
 */

import { fmtEvent, shortHex } from "../format.js";
import type { Store } from "../store.js";
import type { BondOut, LotTrace } from "../types.js";
import { el } from "./dom.js";

function offerForm(store: Store): HTMLElement {
  const draft = store.state.offerDraft;
  if (draft === null) throw new Error("offer form without draft");
  const gas = store.state.params?.gas_fee;
  const pending = draft.txId !== null;
  return el(
    "form",
    {
      class: "offer-form",
      onsubmit: (event) => {
        event.preventDefault();
        void store.submitOffer();
      },
    },
    el("label", { for: "offer-base" }, "Base price"),
    el("input", {
      id: "offer-base",
      "data-field": "offer-base",
      type: "text",
      inputmode: "numeric",
      value: draft.basePrice,
      disabled: draft.busy || pending,
      oninput: (event) => store.setOfferField("basePrice", (event.target as HTMLInputElement).value),
    }),
    el("label", { for: "offer-duration" }, "Bidding window (blocks)"),
    el("input", {
      id: "offer-duration",
      "data-field": "offer-duration",
      type: "text",
      inputmode: "numeric",
      value: draft.duration,
      disabled: draft.busy || pending,
      oninput: (event) => store.setOfferField("duration", (event.target as HTMLInputElement).value),
    }),
    el("label", { for: "offer-mode" }, "Settlement"),
    el(
      "select",
      {
        id: "offer-mode",
        "data-field": "offer-mode",
        disabled: draft.busy || pending,
        onchange: (event) => store.setOfferField("mode", (event.target as HTMLSelectElement).value),
      },
      el("option", { value: "cash", selected: draft.mode === "cash" }, "cash"),
      el("option", { value: "bond", selected: draft.mode === "bond" }, "bond allowed"),
    ),
    el(
      "span",
      { "data-role": "gas-note", class: "gas-note" },
      gas !== undefined ? `Opening charges a gas fee of ${gas}.` : "",
    ),
    el(
      "button",
      { type: "submit", "data-action": "submit-offer", disabled: draft.busy || pending },
      "Sign and submit",
    ),
    el(
      "button",
      { type: "button", "data-action": "cancel-offer", onclick: () => store.cancelOffer() },
      "Cancel",
    ),
    pending ? el("span", { "data-role": "offer-pending", class: "pending" }, "waiting for receipt…") : null,
    draft.error !== null
      ? el("span", { "data-role": "offer-error", class: "error" }, draft.error)
      : null,
  );
}

function lotRow(store: Store, lot: LotTrace): HTMLElement[] {
  const locked = lot.locked_in !== null;
  const rows: HTMLElement[] = [
    el(
      "tr",
      { "data-lot-id": lot.lot_id },
      el("td", { title: lot.lot_id }, shortHex(lot.lot_id)),
      el("td", { "data-cell": "kwh" }, `${lot.kwh} kWh`),
      el(
        "td",
        { "data-cell": "lot-state" },
        locked ? `at auction ${shortHex(lot.locked_in ?? "")}` : "free",
      ),
      el(
        "td",
        {},
        el(
          "button",
          {
            "data-action": "offer",
            disabled: locked,
            title: locked ? "already offered" : "",
            onclick: () => store.openOfferForm(lot.lot_id),
          },
          "Offer",
        ),
        el(
          "button",
          { "data-action": "trace", onclick: () => void store.openTrace(lot.lot_id) },
          "Trace",
        ),
      ),
    ),
  ];
  if (store.state.offerDraft?.lotId === lot.lot_id) {
    rows.push(el("tr", { class: "offer-form-row" }, el("td", { colspan: "4" }, offerForm(store))));
  }
  return rows;
}

function bondRow(store: Store, bond: BondOut): HTMLElement {
  const mature = store.state.headHeight >= bond.maturity_height;
  const redeemable = bond.state === "outstanding" && mature;
  return el(
    "tr",
    { "data-bond-id": bond.id },
    el("td", { title: bond.id }, shortHex(bond.id)),
    el("td", { "data-cell": "face" }, String(bond.face_value)),
    el("td", { "data-cell": "issuer", title: bond.issuer }, shortHex(bond.issuer)),
    el("td", { "data-cell": "maturity" }, `height ${bond.maturity_height}`),
    el("td", { "data-cell": "bond-state" }, bond.state),
    el(
      "td",
      {},
      bond.state === "outstanding"
        ? el(
            "button",
            {
              "data-action": "redeem",
              disabled: !redeemable,
              title: redeemable ? "" : "not mature yet",
              onclick: () => void store.redeemBond(bond.id),
            },
            "Redeem",
          )
        : null,
    ),
  );
}

function tracePanel(store: Store): HTMLElement | null {
  const trace = store.state.traceView;
  if (trace === null) return null;
  return el(
    "section",
    { "data-role": "trace-panel", class: "trace-panel" },
    el(
      "header",
      {},
      el("h3", {}, `Lot ${shortHex(trace.lot_id)} · ${trace.kwh} kWh`),
      el(
        "button",
        { "data-action": "close-trace", onclick: () => store.closeTrace() },
        "Close",
      ),
    ),
    el("p", {}, `Current owner ${shortHex(trace.owner)}`),
    el(
      "ol",
      { class: "trace-events" },
      ...trace.events.map((event) =>
        el("li", { "data-role": "trace-event" }, fmtEvent(event)),
      ),
    ),
  );
}

export function renderPortfolio(store: Store): HTMLElement {
  const { account, lots, bonds, wallet } = store.state;
  if (wallet === null) {
    return el(
      "section",
      { class: "portfolio" },
      el("p", { class: "empty" }, "No wallet on this node; the board is read-only."),
    );
  }
  return el(
    "section",
    { class: "portfolio" },
    el(
      "div",
      { class: "balance-card" },
      el("h3", {}, wallet),
      account !== null
        ? el(
            "p",
            {},
            el("span", { "data-role": "balance" }, String(account.balance)),
            ` funds · nonce ${account.nonce} · ${account.qualified ? "qualified" : "not qualified"}`,
          )
        : el("p", {}, "loading account…"),
      account !== null ? el("p", { class: "addr", title: account.address }, account.address) : null,
    ),
    el("h3", {}, "Energy lots"),
    lots.length === 0
      ? el("p", { class: "empty", "data-role": "empty-lots" }, "No lots owned.")
      : el(
          "table",
          { class: "lots-table" },
          el(
            "thead",
            {},
            el(
              "tr",
              {},
              el("th", {}, "Lot"),
              el("th", {}, "Energy"),
              el("th", {}, "State"),
              el("th", {}, ""),
            ),
          ),
          el("tbody", {}, ...lots.flatMap((lot) => lotRow(store, lot))),
        ),
    tracePanel(store),
    el("h3", {}, "Bonds held"),
    bonds.length === 0
      ? el("p", { class: "empty", "data-role": "empty-bonds" }, "No bonds held.")
      : el(
          "table",
          { class: "bonds-table" },
          el(
            "thead",
            {},
            el(
              "tr",
              {},
              el("th", {}, "Bond"),
              el("th", {}, "Face value"),
              el("th", {}, "Issuer"),
              el("th", {}, "Maturity"),
              el("th", {}, "State"),
              el("th", {}, ""),
            ),
          ),
          el("tbody", {}, ...bonds.map((bond) => bondRow(store, bond))),
        ),
  );
}
