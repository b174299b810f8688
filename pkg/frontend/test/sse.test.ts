import { createServer, type Server, type ServerResponse } from "node:http";
import { afterEach, describe, expect, test } from "vitest";
import { EventStream, type StreamState } from "../src/sse.js";
import type { StreamFrame } from "../src/types.js";
import { waitFor } from "./helpers.js";

/** Bare event-stream endpoint the tests write raw bytes through. */
class ScriptedStream {
  urls: string[] = [];
  private conns: ServerResponse[] = [];
  private server: Server | null = null;

  async start(): Promise<string> {
    this.server = createServer((req, res) => {
      if (req.method === "OPTIONS") {
        res.writeHead(204, {
          "access-control-allow-origin": "*",
          "access-control-allow-methods": "GET,OPTIONS",
          "access-control-allow-headers": "content-type",
        });
        res.end();
        return;
      }
      this.urls.push(req.url ?? "");
      res.writeHead(200, {
        "content-type": "text/event-stream",
        "access-control-allow-origin": "*",
      });
      res.flushHeaders();
      this.conns.push(res);
    });
    await new Promise<void>((resolve) => this.server?.listen(0, "127.0.0.1", resolve));
    const address = this.server.address();
    if (address === null || typeof address === "string") throw new Error("no port");
    return `http://127.0.0.1:${address.port}`;
  }

  write(chunk: string): void {
    const conn = this.conns.at(-1);
    if (conn === undefined) throw new Error("no connection yet");
    conn.write(chunk);
  }

  dropAll(): void {
    for (const conn of this.conns) conn.destroy();
    this.conns = [];
  }

  async stop(): Promise<void> {
    this.dropAll();
    const server = this.server;
    this.server = null;
    if (server !== null) {
      server.closeAllConnections();
      await new Promise<void>((resolve) => server.close(() => resolve()));
    }
  }
}

function headFrame(seq: number): string {
  const data = { seq, event: "head", height: 100 + seq, hash: "ab", state_root: "cd" };
  return `id: ${seq}\nevent: head\ndata: ${JSON.stringify(data)}\n\n`;
}

interface Rig {
  server: ScriptedStream;
  stream: EventStream;
  frames: StreamFrame[];
  states: StreamState[];
}

async function connect(): Promise<Rig> {
  const server = new ScriptedStream();
  const url = await server.start();
  const frames: StreamFrame[] = [];
  const states: StreamState[] = [];
  const stream = new EventStream({
    url,
    onFrame: (frame) => frames.push(frame),
    onState: (state) => states.push(state),
    retryMs: 20,
  });
  stream.start();
  await waitFor(() => states.includes("live"));
  return { server, stream, frames, states };
}

let rig: Rig;
afterEach(async () => {
  rig.stream.stop();
  await rig.server.stop();
});

describe("event stream client", () => {
  test("parses frames regardless of chunk boundaries", async () => {
    rig = await connect();

    const whole = headFrame(0);
    rig.server.write(whole.slice(0, 9)); // mid-line split
    await new Promise((resolve) => setTimeout(resolve, 20));
    rig.server.write(whole.slice(9));
    await waitFor(() => rig.frames.length === 1);

    // Two frames in one chunk dispatch separately and in order.
    rig.server.write(headFrame(1) + headFrame(2));
    await waitFor(() => rig.frames.length === 3);
    expect(rig.frames.map((frame) => frame.seq)).toEqual([0, 1, 2]);
  });

  test("drops frames with an already-seen sequence number", async () => {
    rig = await connect();

    rig.server.write(headFrame(0) + headFrame(0) + headFrame(1));
    await waitFor(() => rig.frames.length === 2);
    await new Promise((resolve) => setTimeout(resolve, 30));
    expect(rig.frames.map((frame) => frame.seq)).toEqual([0, 1]);
  });

  test("reconnects with ?since=<last seq> and survives a replay overlap", async () => {
    rig = await connect();
    expect(rig.server.urls).toEqual(["/v1/events?since=-1"]);

    rig.server.write(headFrame(0) + headFrame(1));
    await waitFor(() => rig.frames.length === 2);

    rig.server.dropAll();
    await waitFor(() => rig.states.includes("stale"));
    await waitFor(() => rig.server.urls.length === 2);
    expect(rig.server.urls[1]).toBe("/v1/events?since=1");

    // A sloppy replay repeating seq 1 must not re-dispatch it.
    rig.server.write(headFrame(1) + headFrame(2));
    await waitFor(() => rig.frames.length === 3);
    expect(rig.frames.map((frame) => frame.seq)).toEqual([0, 1, 2]);
    expect(rig.states.at(-1)).toBe("live");
  });
});
