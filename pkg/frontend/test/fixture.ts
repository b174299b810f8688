/**
 * Scripted fixture node for UI tests.
 *
 * Serves the same JSON shapes as a real node over a real HTTP port, but
 * every response is test-scripted data: the fixture performs no protocol
 * logic.  Submitting a transaction pops the next scripted step, which
 * typically swaps in updated board data and pushes receipt/head frames
 * onto the event stream, mimicking what a real node would broadcast.
 */

import { createServer, type IncomingMessage, type Server, type ServerResponse } from "node:http";
import type {
  AccountOut,
  AuctionRow,
  BondOut,
  ChainEvent,
  LotTrace,
  ParamsOut,
  SignOut,
  StreamFrame,
  WalletEntry,
} from "../src/types.js";

export interface FixtureData {
  auctions: AuctionRow[];
  params: ParamsOut;
  wallets: WalletEntry[];
  accounts: Record<string, AccountOut>;
  lots: Record<string, LotTrace>;
  bonds: Record<string, BondOut>;
}

/** Runs after a POST /v1/tx is recorded; mutate data and push frames here. */
export type SubmitStep = (fixture: FixtureNode, txHex: string) => void;

const CORS = {
  "access-control-allow-origin": "*",
  "access-control-allow-methods": "GET,POST,OPTIONS",
  "access-control-allow-headers": "content-type",
};

export class FixtureNode {
  readonly events: StreamFrame[] = [];
  readonly submittedHex: string[] = [];
  readonly signDocs: Record<string, unknown>[] = [];
  readonly submitSteps: SubmitStep[] = [];
  /** Scripted sign failures: {code, message, status} consumed before signQueue. */
  signErrors: { code: string; message: string; status: number }[] = [];
  getCounts: Record<string, number> = {};

  private server: Server | null = null;
  private readonly streams = new Set<{ res: ServerResponse; timer: NodeJS.Timeout }>();
  private signCounter = 0;

  constructor(public data: FixtureData) {}

  async start(): Promise<string> {
    this.server = createServer((req, res) => this.route(req, res));
    await new Promise<void>((resolve) => this.server?.listen(0, "127.0.0.1", resolve));
    const address = this.server.address();
    if (address === null || typeof address === "string") throw new Error("no port");
    return `http://127.0.0.1:${address.port}`;
  }

  async stop(): Promise<void> {
    this.killStreams();
    const server = this.server;
    this.server = null;
    if (server !== null) {
      server.closeAllConnections();
      await new Promise<void>((resolve) => server.close(() => resolve()));
    }
  }

  /** Drop every open event-stream connection; clients should reconnect. */
  killStreams(): void {
    for (const stream of this.streams) {
      clearInterval(stream.timer);
      stream.res.destroy();
    }
    this.streams.clear();
  }

  pushHead(height: number): void {
    this.events.push({
      seq: this.events.length,
      event: "head",
      height,
      hash: "ab".repeat(32),
      state_root: "cd".repeat(32),
    });
  }

  pushReceipt(receipt: {
    height: number;
    tx_id: string;
    status: "accepted" | "rejected";
    reason?: string | null;
    events?: ChainEvent[];
  }): void {
    this.events.push({
      seq: this.events.length,
      event: "receipt",
      height: receipt.height,
      tx_id: receipt.tx_id,
      status: receipt.status,
      reason: receipt.reason ?? null,
      events: receipt.events ?? [],
    });
  }

  /** Next sign response; tests read tx_id/hex from here to script receipts. */
  nextSign(): SignOut {
    const n = this.signCounter;
    this.signCounter += 1;
    return {
      tx_id: (10 + n).toString(16).padStart(2, "0").repeat(32),
      hex: `de${n.toString(16).padStart(2, "0")}`.repeat(8),
      sender: this.data.wallets[0]?.address ?? "00".repeat(20),
      nonce: n,
    };
  }

  /** Peek at the sign response the fixture will hand out on call N (0-based). */
  signAt(n: number): SignOut {
    return {
      tx_id: (10 + n).toString(16).padStart(2, "0").repeat(32),
      hex: `de${n.toString(16).padStart(2, "0")}`.repeat(8),
      sender: this.data.wallets[0]?.address ?? "00".repeat(20),
      nonce: n,
    };
  }

  // -- routing ---------------------------------------------------------------

  private route(req: IncomingMessage, res: ServerResponse): void {
    const url = new URL(req.url ?? "/", "http://fixture");
    const path = url.pathname;
    this.getCounts[path] = (this.getCounts[path] ?? 0) + 1;

    if (req.method === "OPTIONS") {
      res.writeHead(204, CORS);
      res.end();
      return;
    }
    if (path === "/v1/events") {
      this.streamEvents(url, res);
      return;
    }
    if (req.method === "POST") {
      void this.handlePost(req, res, path);
      return;
    }
    this.handleGet(res, path);
  }

  private json(res: ServerResponse, status: number, body: unknown): void {
    res.writeHead(status, { "content-type": "application/json", ...CORS });
    res.end(JSON.stringify(body));
  }

  private notFound(res: ServerResponse, what: string): void {
    this.json(res, 404, { code: "NOT_FOUND", message: `no ${what}` });
  }

  private handleGet(res: ServerResponse, path: string): void {
    const { data } = this;
    if (path === "/v1/chain/head") {
      const height = this.events.reduce(
        (acc, ev) => (ev.event === "head" ? ev.height : acc),
        0,
      );
      this.json(res, 200, { height, hash: "ab".repeat(32), state_root: "cd".repeat(32) });
      return;
    }
    if (path === "/v1/auctions") {
      this.json(res, 200, data.auctions);
      return;
    }
    if (path === "/v1/params") {
      this.json(res, 200, data.params);
      return;
    }
    if (path === "/v1/wallets") {
      this.json(res, 200, data.wallets);
      return;
    }
    let m = path.match(/^\/v1\/auctions\/([0-9a-f]+)$/);
    if (m !== null) {
      const row = data.auctions.find((a) => a.id === m?.[1]);
      if (row === undefined) return this.notFound(res, "auction");
      this.json(res, 200, { ...row, history: [] });
      return;
    }
    m = path.match(/^\/v1\/accounts\/([0-9a-f]+)$/);
    if (m !== null) {
      const addr = m[1] ?? "";
      const account =
        data.accounts[addr] ?? { address: addr, balance: 0, nonce: 0, qualified: false };
      this.json(res, 200, account);
      return;
    }
    m = path.match(/^\/v1\/lots\/([0-9a-f]+)\/trace$/);
    if (m !== null) {
      const lot = data.lots[m[1] ?? ""];
      if (lot === undefined) return this.notFound(res, "lot");
      this.json(res, 200, lot);
      return;
    }
    m = path.match(/^\/v1\/bonds\/([0-9a-f]+)$/);
    if (m !== null) {
      const bond = data.bonds[m[1] ?? ""];
      if (bond === undefined) return this.notFound(res, "bond");
      this.json(res, 200, bond);
      return;
    }
    this.notFound(res, "route");
  }

  private async handlePost(
    req: IncomingMessage,
    res: ServerResponse,
    path: string,
  ): Promise<void> {
    const chunks: Buffer[] = [];
    for await (const chunk of req) chunks.push(chunk as Buffer);
    const body = JSON.parse(Buffer.concat(chunks).toString() || "{}") as Record<string, unknown>;

    if (/^\/v1\/wallet\/[^/]+\/sign$/.test(path)) {
      this.signDocs.push(body);
      const scripted = this.signErrors.shift();
      if (scripted !== undefined) {
        this.json(res, scripted.status, { code: scripted.code, message: scripted.message });
        return;
      }
      this.json(res, 200, this.nextSign());
      return;
    }
    if (path === "/v1/tx") {
      const hex = String(body["hex"] ?? "");
      this.submittedHex.push(hex);
      const step = this.submitSteps.shift();
      if (step !== undefined) step(this, hex);
      this.json(res, 200, { tx_id: "00".repeat(32), status: "queued" });
      return;
    }
    this.notFound(res, "route");
  }

  private streamEvents(url: URL, res: ServerResponse): void {
    const since = Number(url.searchParams.get("since") ?? "-1");
    res.writeHead(200, { "content-type": "text/event-stream", ...CORS });
    res.flushHeaders(); // headers must reach the client even with no events yet
    let cursor = since + 1;
    const flush = () => {
      while (cursor < this.events.length) {
        const event = this.events[cursor];
        cursor += 1;
        if (event === undefined) break;
        res.write(`id: ${event.seq}\nevent: ${event.event}\ndata: ${JSON.stringify(event)}\n\n`);
      }
    };
    flush();
    const timer = setInterval(flush, 10);
    const entry = { res, timer };
    this.streams.add(entry);
    res.on("close", () => {
      clearInterval(timer);
      this.streams.delete(entry);
    });
  }
}
