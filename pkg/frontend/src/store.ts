/**
 * Client-side store: one event-stream consumer updating a snapshot of what
 * the node reports, plus the transient state of user flows (drafts, pending
 * transactions).
 *
 * The store never computes protocol values.  Stream frames only tell it
 * that something changed and which asset ids exist; every displayed fact is
 * then refetched from the API.  Ownership of lots and bonds is likewise
 * decided by the API response (owner/holder fields), never inferred from
 * events.  Wallet selection keeps a name and an address; secret key
 * material never reaches this process.
 */

import { ApiError, type NodeApi } from "./api.js";
import type { StreamState } from "./sse.js";
import type {
  AccountOut,
  AuctionRow,
  BondOut,
  LotTrace,
  ParamsOut,
  ReceiptFrame,
  SettlementMode,
  StreamFrame,
  WalletEntry,
} from "./types.js";

export type SortKey = "floor" | "remaining";
export type Tab = "board" | "portfolio";

export interface PendingTx {
  txId: string;
  label: string;
  state: "pending" | "accepted" | "rejected";
  reason: string | null;
}

export interface BidDraft {
  auctionId: string;
  amount: string;
  busy: boolean;
  txId: string | null;
  error: string | null;
}

export interface OfferDraft {
  lotId: string;
  basePrice: string;
  duration: string;
  mode: SettlementMode;
  busy: boolean;
  txId: string | null;
  error: string | null;
}

export interface StoreState {
  stream: StreamState;
  headHeight: number;
  wallets: WalletEntry[];
  wallet: string | null;
  walletAddress: string | null;
  params: ParamsOut | null;
  auctions: AuctionRow[];
  account: AccountOut | null;
  lots: LotTrace[];
  bonds: BondOut[];
  pending: PendingTx[];
  bidDraft: BidDraft | null;
  offerDraft: OfferDraft | null;
  traceView: LotTrace | null;
  sortKey: SortKey;
  tab: Tab;
  loadError: string | null;
}

const PENDING_SHOWN = 6;

export class Store {
  readonly state: StoreState = {
    stream: "connecting",
    headHeight: 0,
    wallets: [],
    wallet: null,
    walletAddress: null,
    params: null,
    auctions: [],
    account: null,
    lots: [],
    bonds: [],
    pending: [],
    bidDraft: null,
    offerDraft: null,
    traceView: null,
    sortKey: "floor",
    tab: "board",
    loadError: null,
  };

  private readonly listeners = new Set<() => void>();
  private readonly knownLots = new Set<string>();
  private readonly knownBonds = new Set<string>();
  private dirtySnapshot = false;
  private dirtyPortfolio = false;
  private draining: Promise<void> | null = null;
  private actionCount = 0;

  constructor(private readonly api: NodeApi) {}

  subscribe(listener: () => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  /** Resolves once no fetches or actions are in flight.  Test hook. */
  async idle(): Promise<void> {
    while (this.actionCount > 0 || this.draining !== null) {
      await (this.draining ?? sleep(5));
      await sleep(0);
    }
  }

  private beginAction(): () => void {
    this.actionCount += 1;
    return () => {
      this.actionCount -= 1;
    };
  }

  // -- initial load ----------------------------------------------------------

  async init(): Promise<void> {
    const end = this.beginAction();
    try {
      const [wallets, params, head] = await Promise.all([
        this.api.wallets(),
        this.api.params(),
        this.api.head(),
      ]);
      this.state.wallets = wallets;
      this.state.params = params;
      this.state.headHeight = head.height;
      const first = wallets[0];
      if (first !== undefined && this.state.wallet === null) {
        this.state.wallet = first.name;
        this.state.walletAddress = first.address;
      }
      this.state.loadError = null;
    } catch (err) {
      this.state.loadError = describe(err);
    } finally {
      end();
    }
    this.schedule({ snapshot: true, portfolio: true });
    this.notify();
  }

  // -- event stream ------------------------------------------------------------

  handleStreamState(streamState: StreamState): void {
    this.state.stream = streamState;
    if (streamState === "live") {
      // A reconnect may have replayed nothing; resync regardless.
      this.schedule({ snapshot: true, portfolio: true });
    }
    this.notify();
  }

  handleFrame(frame: StreamFrame): void {
    if (frame.event === "head") {
      this.state.headHeight = frame.height;
      this.schedule({ snapshot: true });
    } else if (frame.event === "receipt") {
      this.applyReceipt(frame);
      this.schedule({ snapshot: true, portfolio: true });
    }
    this.notify();
  }

  private applyReceipt(frame: ReceiptFrame): void {
    for (const event of frame.events) {
      if (typeof event["lot_id"] === "string") this.knownLots.add(event["lot_id"]);
      if (typeof event["bond_id"] === "string") this.knownBonds.add(event["bond_id"]);
    }
    const entry = this.state.pending.find((p) => p.txId === frame.tx_id);
    if (entry !== undefined && entry.state === "pending") {
      entry.state = frame.status;
      entry.reason = frame.reason;
    }
    const bid = this.state.bidDraft;
    if (bid !== null && bid.txId === frame.tx_id) {
      if (frame.status === "accepted") {
        this.state.bidDraft = null;
      } else {
        bid.error = frame.reason ?? "rejected";
        bid.txId = null;
      }
    }
    const offer = this.state.offerDraft;
    if (offer !== null && offer.txId === frame.tx_id) {
      if (frame.status === "accepted") {
        this.state.offerDraft = null;
      } else {
        offer.error = frame.reason ?? "rejected";
        offer.txId = null;
      }
    }
  }

  // -- refresh queue -------------------------------------------------------------

  private schedule(what: { snapshot?: boolean; portfolio?: boolean }): void {
    this.dirtySnapshot ||= what.snapshot === true;
    this.dirtyPortfolio ||= what.portfolio === true;
    if (this.draining === null) {
      this.draining = this.drain().finally(() => {
        this.draining = null;
      });
    }
  }

  private async drain(): Promise<void> {
    while (this.dirtySnapshot || this.dirtyPortfolio) {
      const doSnapshot = this.dirtySnapshot;
      const doPortfolio = this.dirtyPortfolio;
      this.dirtySnapshot = false;
      this.dirtyPortfolio = false;
      try {
        if (doSnapshot) await this.refreshSnapshot();
        if (doPortfolio) await this.refreshPortfolio();
        this.state.loadError = null;
      } catch (err) {
        this.state.loadError = describe(err);
      }
      this.notify();
    }
  }

  private async refreshSnapshot(): Promise<void> {
    this.state.auctions = await this.api.auctions();
    if (this.state.walletAddress !== null) {
      this.state.account = await this.api.account(this.state.walletAddress);
    }
  }

  private async refreshPortfolio(): Promise<void> {
    const address = this.state.walletAddress;
    if (address === null) {
      this.state.lots = [];
      this.state.bonds = [];
      return;
    }
    const lots: LotTrace[] = [];
    for (const lotId of this.knownLots) {
      const trace = await this.api.lotTrace(lotId);
      if (trace.owner === address) lots.push(trace);
    }
    lots.sort((a, b) => (a.lot_id < b.lot_id ? -1 : 1));
    const bonds: BondOut[] = [];
    for (const bondId of this.knownBonds) {
      const bond = await this.api.bond(bondId);
      if (bond.holder === address) bonds.push(bond);
    }
    bonds.sort((a, b) => (a.id < b.id ? -1 : 1));
    this.state.lots = lots;
    this.state.bonds = bonds;
    if (this.state.traceView !== null) {
      const shown = this.state.traceView.lot_id;
      this.state.traceView = lots.find((l) => l.lot_id === shown) ?? this.state.traceView;
    }
  }

  // -- session -------------------------------------------------------------------

  selectWallet(name: string): void {
    const entry = this.state.wallets.find((w) => w.name === name);
    if (entry === undefined) return;
    this.state.wallet = entry.name;
    this.state.walletAddress = entry.address;
    this.state.account = null;
    this.state.bidDraft = null;
    this.state.offerDraft = null;
    this.schedule({ snapshot: true, portfolio: true });
    this.notify();
  }

  setSort(key: SortKey): void {
    this.state.sortKey = key;
    this.notify();
  }

  setTab(tab: Tab): void {
    this.state.tab = tab;
    this.notify();
  }

  // -- bid flow --------------------------------------------------------------------

  openBidForm(auctionId: string): void {
    const row = this.state.auctions.find((a) => a.id === auctionId);
    if (row === undefined || row.next_valid_bid === null) return;
    this.state.bidDraft = {
      auctionId,
      amount: String(row.next_valid_bid),
      busy: false,
      txId: null,
      error: null,
    };
    this.notify();
  }

  setBidAmount(amount: string): void {
    if (this.state.bidDraft === null) return;
    this.state.bidDraft.amount = amount;
    this.notify();
  }

  cancelBid(): void {
    this.state.bidDraft = null;
    this.notify();
  }

  async submitBid(): Promise<void> {
    const draft = this.state.bidDraft;
    const wallet = this.state.wallet;
    if (draft === null || wallet === null || draft.busy) return;
    if (!/^\d+$/.test(draft.amount)) {
      draft.error = "amount must be a whole number";
      this.notify();
      return;
    }
    const end = this.beginAction();
    draft.busy = true;
    draft.error = null;
    this.notify();
    try {
      const signed = await this.api.signAndSubmit(wallet, {
        kind: "place_bid",
        auction_id: draft.auctionId,
        amount: Number(draft.amount),
      });
      draft.txId = signed.tx_id;
      this.pushPending(signed.tx_id, `bid ${draft.amount} on auction ${draft.auctionId.slice(0, 8)}`);
    } catch (err) {
      draft.error = err instanceof ApiError ? err.code : describe(err);
    } finally {
      draft.busy = false;
      end();
      this.notify();
    }
  }

  // -- offer flow -------------------------------------------------------------------

  openOfferForm(lotId: string): void {
    const duration = this.state.params?.default_auction_duration;
    this.state.offerDraft = {
      lotId,
      basePrice: "1",
      duration: duration !== undefined ? String(duration) : "",
      mode: "cash",
      busy: false,
      txId: null,
      error: null,
    };
    this.notify();
  }

  setOfferField(field: "basePrice" | "duration" | "mode", value: string): void {
    const draft = this.state.offerDraft;
    if (draft === null) return;
    if (field === "mode") draft.mode = value === "bond" ? "bond" : "cash";
    else draft[field] = value;
    this.notify();
  }

  cancelOffer(): void {
    this.state.offerDraft = null;
    this.notify();
  }

  async submitOffer(): Promise<void> {
    const draft = this.state.offerDraft;
    const wallet = this.state.wallet;
    if (draft === null || wallet === null || draft.busy) return;
    if (!/^\d+$/.test(draft.basePrice) || !/^\d+$/.test(draft.duration)) {
      draft.error = "price and duration must be whole numbers";
      this.notify();
      return;
    }
    const end = this.beginAction();
    draft.busy = true;
    draft.error = null;
    this.notify();
    try {
      const signed = await this.api.signAndSubmit(wallet, {
        kind: "open_auction",
        lot_id: draft.lotId,
        base_price: Number(draft.basePrice),
        duration_blocks: Number(draft.duration),
        mode: draft.mode,
      });
      draft.txId = signed.tx_id;
      this.pushPending(signed.tx_id, `offer lot ${draft.lotId.slice(0, 8)} at ${draft.basePrice}`);
    } catch (err) {
      draft.error = err instanceof ApiError ? err.code : describe(err);
    } finally {
      draft.busy = false;
      end();
      this.notify();
    }
  }

  // -- bonds ---------------------------------------------------------------------------

  async redeemBond(bondId: string): Promise<void> {
    const wallet = this.state.wallet;
    if (wallet === null) return;
    const end = this.beginAction();
    try {
      const signed = await this.api.signAndSubmit(wallet, {
        kind: "redeem_bond",
        bond_id: bondId,
      });
      this.pushPending(signed.tx_id, `redeem bond ${bondId.slice(0, 8)}`);
    } catch (err) {
      this.pushPendingError(`redeem bond ${bondId.slice(0, 8)}`, err);
    } finally {
      end();
      this.notify();
    }
  }

  // -- trace drill-down ------------------------------------------------------------------

  async openTrace(lotId: string): Promise<void> {
    const end = this.beginAction();
    try {
      this.state.traceView = await this.api.lotTrace(lotId);
    } catch (err) {
      this.state.loadError = describe(err);
    } finally {
      end();
      this.notify();
    }
  }

  closeTrace(): void {
    this.state.traceView = null;
    this.notify();
  }

  // -- pending list ------------------------------------------------------------------------

  private pushPending(txId: string, label: string): void {
    this.state.pending.unshift({ txId, label, state: "pending", reason: null });
    this.state.pending.length = Math.min(this.state.pending.length, PENDING_SHOWN);
  }

  private pushPendingError(label: string, err: unknown): void {
    const reason = err instanceof ApiError ? err.code : describe(err);
    this.state.pending.unshift({ txId: "", label, state: "rejected", reason });
    this.state.pending.length = Math.min(this.state.pending.length, PENDING_SHOWN);
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  if (err instanceof Error) return err.message;
  return String(err);
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
