/**
 * Wire types for the node's HTTP API and event stream.
 *
 * These mirror the server's response models field for field.  The UI never
 * derives protocol values itself; everything rendered comes from one of
 * these shapes, so the types double as the list of facts the UI may show.
 * All binary fields are lowercase hex without a prefix.
 */

export interface HeadOut {
  height: number;
  hash: string;
  state_root: string;
}

export interface BestBid {
  bidder: string;
  amount: number;
}

export type AuctionStatus = "open" | "settled" | "discarded";
export type SettlementMode = "cash" | "bond";

export interface AuctionRow {
  id: string;
  seller: string;
  lot_id: string;
  lot_kwh: number;
  base_price: number;
  min_increment: number;
  deadline_height: number;
  mode: SettlementMode;
  status: AuctionStatus;
  best_bid: BestBid | null;
  /** Lowest acceptable next bid, server-computed; null once closed. */
  next_valid_bid: number | null;
  blocks_remaining: number | null;
}

/** One chain event, flattened: {kind, ...fields}. */
export interface ChainEvent {
  kind: string;
  [key: string]: unknown;
}

export interface AuctionDetail extends AuctionRow {
  history: { height: number; event: ChainEvent }[];
}

export interface AccountOut {
  address: string;
  balance: number;
  nonce: number;
  qualified: boolean;
}

export interface LotTrace {
  lot_id: string;
  kwh: number;
  owner: string;
  locked_in: string | null;
  events: ChainEvent[];
}

export type BondStateName = "outstanding" | "redeemed" | "defaulted";

export interface BondOut {
  id: string;
  face_value: number;
  issuer: string;
  holder: string;
  maturity_height: number;
  state: BondStateName;
}

export interface ParamsOut {
  gas_fee: number;
  default_min_increment: number;
  default_auction_duration: number;
  bond_maturity_delta: number;
  block_interval_ticks: number;
  authorities: string[];
  authority_members: string[];
  authority_threshold: number;
  genesis_supply: number;
}

export interface WalletEntry {
  name: string;
  address: string;
}

export interface ReceiptOut {
  tx_id: string;
  status: "accepted" | "rejected";
  reason: string | null;
  events: ChainEvent[];
}

export interface TxStatusOut {
  tx_id: string;
  status: string;
  height: number | null;
  receipt: ReceiptOut | null;
}

export interface SignOut {
  tx_id: string;
  hex: string;
  sender: string;
  nonce: number;
}

export interface SubmitOut {
  tx_id: string;
  status: string;
}

/** Unsigned transaction documents accepted by POST /v1/wallet/{name}/sign. */
export type TxDoc =
  | { kind: "place_bid"; auction_id: string; amount: number }
  | {
      kind: "open_auction";
      lot_id: string;
      base_price: number;
      min_increment?: number;
      duration_blocks?: number;
      mode?: SettlementMode;
    }
  | { kind: "redeem_bond"; bond_id: string }
  | { kind: "transfer"; to: string; amount: number }
  | { kind: "transfer_lot"; to: string; lot_id: string }
  | { kind: "transfer_bond"; to: string; bond_id: string }
  | { kind: "mint_lot"; kwh: number };

// -- event stream frames ----------------------------------------------------

export interface HeadFrame {
  seq: number;
  event: "head";
  height: number;
  hash: string;
  state_root: string;
}

export interface ReceiptFrame {
  seq: number;
  event: "receipt";
  height: number;
  tx_id: string;
  status: "accepted" | "rejected";
  reason: string | null;
  events: ChainEvent[];
}

export type StreamFrame = HeadFrame | ReceiptFrame;
