/** Shared fixture data and DOM helpers for the UI tests. */

import { createApp, type App } from "../src/app.js";
import type { AuctionRow, ParamsOut } from "../src/types.js";
import { FixtureNode, type FixtureData } from "./fixture.js";

export const ALICE = "aa".repeat(20);
export const BOB = "b0".repeat(20);
export const CAROL = "cc".repeat(20);

export const digest = (pair: string): string => pair.repeat(32);

export const PARAMS: ParamsOut = {
  gas_fee: 10,
  default_min_increment: 1,
  default_auction_duration: 20,
  bond_maturity_delta: 100,
  block_interval_ticks: 5,
  authorities: [ALICE],
  authority_members: [ALICE, BOB],
  authority_threshold: 2,
  genesis_supply: 10_000,
};

/**
 * Three open auctions with floors and countdowns chosen so sorting by floor
 * and sorting by blocks remaining produce different orders.
 */
export function threeAuctions(): AuctionRow[] {
  return [
    {
      id: digest("a1"),
      seller: ALICE,
      lot_id: digest("1a"),
      lot_kwh: 9,
      base_price: 5,
      min_increment: 1,
      deadline_height: 60,
      mode: "cash",
      status: "open",
      best_bid: null,
      next_valid_bid: 5,
      blocks_remaining: 30,
    },
    {
      id: digest("a2"),
      seller: ALICE,
      lot_id: digest("2a"),
      lot_kwh: 25,
      base_price: 10,
      min_increment: 2,
      deadline_height: 34,
      mode: "bond",
      status: "open",
      best_bid: { bidder: CAROL, amount: 14 },
      next_valid_bid: 16,
      blocks_remaining: 4,
    },
    {
      id: digest("a3"),
      seller: CAROL,
      lot_id: digest("3a"),
      lot_kwh: 12,
      base_price: 3,
      min_increment: 1,
      deadline_height: 42,
      mode: "cash",
      status: "open",
      best_bid: { bidder: ALICE, amount: 3 },
      next_valid_bid: 4,
      blocks_remaining: 12,
    },
  ];
}

export function baseFixture(overrides: Partial<FixtureData> = {}): FixtureData {
  return {
    auctions: threeAuctions(),
    params: PARAMS,
    wallets: [{ name: "bob", address: BOB }],
    accounts: {
      [BOB]: { address: BOB, balance: 5000, nonce: 3, qualified: true },
    },
    lots: {},
    bonds: {},
    ...overrides,
  };
}

export interface Rig {
  fixture: FixtureNode;
  app: App;
  url: string;
}

/** Start a fixture node and mount the app against it. */
export async function mountApp(data: FixtureData): Promise<Rig> {
  const fixture = new FixtureNode(data);
  const url = await fixture.start();
  document.body.innerHTML = '<div id="app"></div>';
  const mount = document.getElementById("app");
  if (mount === null) throw new Error("no mount");
  const app = createApp({ mount, nodeUrl: url, retryMs: 30 });
  await app.store.idle();
  return { fixture, app, url };
}

export async function teardown(rig: Rig): Promise<void> {
  rig.app.stop();
  // Let the aborted stream fetch unwind before the server drops its sockets,
  // otherwise happy-dom logs spurious ECONNRESETs.
  await new Promise((resolve) => setTimeout(resolve, 25));
  await rig.fixture.stop();
}

/** Poll until fn() returns truthy (and return it) or time runs out. */
export async function waitFor<T>(fn: () => T, timeoutMs = 4000): Promise<NonNullable<T>> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const value = fn();
    if (value) return value as NonNullable<T>;
    if (Date.now() > deadline) throw new Error("waitFor timed out");
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
}

export function query<T extends Element>(selector: string): T {
  const node = document.querySelector<T>(selector);
  if (node === null) throw new Error(`missing ${selector}`);
  return node;
}

export function queryAll<T extends Element>(selector: string): T[] {
  return [...document.querySelectorAll<T>(selector)];
}

export function click(selector: string): void {
  query<HTMLElement>(selector).click();
}

export function typeInto(selector: string, value: string): void {
  const input = query<HTMLInputElement>(selector);
  input.value = value;
  input.dispatchEvent(new Event("input", { bubbles: true }));
}

export function rowCell(auctionId: string, cell: string): string {
  return (
    query(`[data-auction-id="${auctionId}"] [data-cell="${cell}"]`).textContent ?? ""
  );
}
