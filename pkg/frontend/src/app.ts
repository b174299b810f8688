/**
 * Application shell: wires the API client, the event stream, and the store
 * together, and redraws the whole page on every store change.  Redrawing
 * everything keeps rendering a pure function of store state; focus is
 * restored by element id afterwards so typing in a form survives updates.
 */

import { NodeApi, type FetchLike } from "./api.js";
import { EventStream } from "./sse.js";
import { Store, type Tab } from "./store.js";
import { renderBoard } from "./views/board.js";
import { el } from "./views/dom.js";
import { renderPortfolio } from "./views/portfolio.js";

export interface AppOptions {
  mount: HTMLElement;
  nodeUrl: string;
  fetchFn?: FetchLike;
  retryMs?: number;
}

export interface App {
  store: Store;
  stream: EventStream;
  stop: () => void;
}

const STREAM_LABELS = { connecting: "connecting…", live: "live", stale: "stale" } as const;

function header(store: Store): HTMLElement {
  const { wallets, wallet, stream, headHeight } = store.state;
  return el(
    "header",
    { class: "topbar" },
    el("h1", {}, "Grid Exchange"),
    el(
      "div",
      { class: "session" },
      el("label", { for: "wallet" }, "Wallet"),
      el(
        "select",
        {
          id: "wallet",
          "data-field": "wallet",
          disabled: wallets.length === 0,
          onchange: (event) => store.selectWallet((event.target as HTMLSelectElement).value),
        },
        ...wallets.map((entry) =>
          el("option", { value: entry.name, selected: entry.name === wallet }, entry.name),
        ),
      ),
      el("span", { "data-role": "head-height", class: "head-height" }, `height ${headHeight}`),
      el(
        "span",
        { "data-role": "stream-state", class: `stream-state ${stream}` },
        STREAM_LABELS[stream],
      ),
    ),
  );
}

function tabs(store: Store): HTMLElement {
  const current = store.state.tab;
  const tab = (id: Tab, label: string) =>
    el(
      "button",
      {
        "data-action": `tab-${id}`,
        class: current === id ? "tab active" : "tab",
        onclick: () => store.setTab(id),
      },
      label,
    );
  return el("nav", { class: "tabs" }, tab("board", "Board"), tab("portfolio", "Portfolio"));
}

function banners(store: Store): HTMLElement[] {
  const out: HTMLElement[] = [];
  if (store.state.stream === "stale") {
    out.push(
      el(
        "div",
        { "data-role": "stale-banner", class: "banner warn" },
        "Connection lost; data may be stale. Reconnecting…",
      ),
    );
  }
  if (store.state.loadError !== null) {
    out.push(
      el("div", { "data-role": "load-error", class: "banner error" }, store.state.loadError),
    );
  }
  return out;
}

function pendingList(store: Store): HTMLElement | null {
  const { pending } = store.state;
  if (pending.length === 0) return null;
  return el(
    "ul",
    { "data-role": "pending-list", class: "pending-list" },
    ...pending.map((item) =>
      el(
        "li",
        { "data-role": "pending-item", class: item.state },
        `${item.label}: ${item.state}${item.reason !== null ? ` (${item.reason})` : ""}`,
      ),
    ),
  );
}

function render(store: Store, mount: HTMLElement): void {
  const active = document.activeElement;
  const focusId = active instanceof HTMLElement ? active.id : "";
  const selection =
    active instanceof HTMLInputElement
      ? { start: active.selectionStart, end: active.selectionEnd }
      : null;

  mount.replaceChildren(
    header(store),
    ...banners(store),
    tabs(store),
    el("main", {}, store.state.tab === "board" ? renderBoard(store) : renderPortfolio(store)),
    pendingList(store) ?? el("div", {}),
  );

  if (focusId !== "") {
    const again = document.getElementById(focusId);
    if (again instanceof HTMLElement) {
      again.focus();
      if (again instanceof HTMLInputElement && selection !== null) {
        try {
          again.setSelectionRange(selection.start, selection.end);
        } catch {
          // not a text-selectable input
        }
      }
    }
  }
}

export function createApp(opts: AppOptions): App {
  const api = new NodeApi(opts.nodeUrl, opts.fetchFn);
  const store = new Store(api);
  const stream = new EventStream({
    url: opts.nodeUrl,
    onFrame: (frame) => store.handleFrame(frame),
    onState: (state) => store.handleStreamState(state),
    ...(opts.fetchFn !== undefined ? { fetchFn: opts.fetchFn } : {}),
    ...(opts.retryMs !== undefined ? { retryMs: opts.retryMs } : {}),
  });

  const unsubscribe = store.subscribe(() => render(store, opts.mount));
  render(store, opts.mount);
  void store.init();
  stream.start();

  return {
    store,
    stream,
    stop: () => {
      unsubscribe();
      stream.stop();
    },
  };
}
