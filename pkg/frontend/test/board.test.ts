import { afterEach, describe, expect, test } from "vitest";
import {
  baseFixture,
  click,
  digest,
  mountApp,
  queryAll,
  rowCell,
  teardown,
  threeAuctions,
  waitFor,
  type Rig,
} from "./helpers.js";

let rig: Rig;
afterEach(async () => {
  await teardown(rig);
});

describe("auction board", () => {
  test("renders one row per auction with the API's floor values", async () => {
    rig = await mountApp(baseFixture());
    await waitFor(() => queryAll("[data-auction-id]").length === 3);

    for (const auction of rig.fixture.data.auctions) {
      expect(rowCell(auction.id, "floor")).toBe(String(auction.next_valid_bid));
      expect(rowCell(auction.id, "kwh")).toBe(`${auction.lot_kwh} kWh`);
      expect(rowCell(auction.id, "remaining")).toBe(`${auction.blocks_remaining} blocks`);
    }
  });

  test("shows the floor exactly as served, even when it looks wrong", async () => {
    // The server owns bid arithmetic; the board must not recompute it.
    const data = baseFixture();
    const first = data.auctions[0];
    if (first === undefined) throw new Error("fixture empty");
    first.next_valid_bid = 999;
    rig = await mountApp(data);
    await waitFor(() => queryAll("[data-auction-id]").length === 3);

    expect(rowCell(first.id, "floor")).toBe("999");
  });

  test("empty chain shows an explanatory empty state", async () => {
    rig = await mountApp(baseFixture({ auctions: [] }));
    await waitFor(() => document.querySelector("[data-role='empty-board']"));

    expect(document.querySelector("[data-role='empty-board']")?.textContent).toContain(
      "No auctions yet",
    );
  });

  test("sorts by floor price and by blocks remaining", async () => {
    rig = await mountApp(baseFixture());
    await waitFor(() => queryAll("[data-auction-id]").length === 3);

    const order = () =>
      queryAll<HTMLElement>("[data-auction-id]").map((row) =>
        row.getAttribute("data-auction-id"),
      );
    // floors: a3=4, a1=5, a2=16
    expect(order()).toEqual([digest("a3"), digest("a1"), digest("a2")]);

    const sort = document.querySelector<HTMLSelectElement>("[data-field='sort']");
    if (sort === null) throw new Error("no sort control");
    sort.value = "remaining";
    sort.dispatchEvent(new Event("change", { bubbles: true }));
    // blocks remaining: a2=4, a3=12, a1=30
    await waitFor(() => order()[0] === digest("a2"));
    expect(order()).toEqual([digest("a2"), digest("a3"), digest("a1")]);
  });

  test("a head event past the deadline moves the row to Settled", async () => {
    rig = await mountApp(baseFixture());
    await waitFor(() => queryAll("[data-auction-id]").length === 3);
    const target = digest("a2");
    expect(rowCell(target, "status")).toBe("Open");

    // One delivery: the fixture publishes the post-deadline snapshot and a
    // single head frame, as a real node would at the deadline block.
    const row = rig.fixture.data.auctions.find((a) => a.id === target);
    if (row === undefined) throw new Error("missing fixture row");
    row.status = "settled";
    row.next_valid_bid = null;
    row.blocks_remaining = null;
    rig.fixture.pushHead(35);

    await waitFor(() => rowCell(target, "status") === "Settled");
    expect(
      document.querySelector(`[data-auction-id="${target}"] [data-action="bid"]`),
    ).toBeNull();
  });

  test("losing the stream shows a stale banner until reconnect", async () => {
    rig = await mountApp(baseFixture());
    await waitFor(() => document.querySelector("[data-role='stream-state']"));
    await waitFor(
      () => document.querySelector("[data-role='stream-state']")?.textContent === "live",
    );

    rig.fixture.killStreams();
    await waitFor(() => document.querySelector("[data-role='stale-banner']"));

    // The client reconnects by itself and the banner clears.
    await waitFor(() => document.querySelector("[data-role='stale-banner']") === null);
    expect(document.querySelector("[data-role='stream-state']")?.textContent).toBe("live");
  });

  test("countdowns track head-advance deliveries", async () => {
    rig = await mountApp(baseFixture());
    await waitFor(() => queryAll("[data-auction-id]").length === 3);
    const target = digest("a1");
    expect(rowCell(target, "remaining")).toBe("30 blocks");

    const row = rig.fixture.data.auctions.find((a) => a.id === target);
    if (row === undefined) throw new Error("missing fixture row");
    row.blocks_remaining = 29;
    rig.fixture.pushHead(31);

    await waitFor(() => rowCell(target, "remaining") === "29 blocks");
  });
});
