/**
 * Event-stream consumer for GET /v1/events.
 *
 * Built on streaming fetch rather than EventSource so one implementation
 * serves browsers and the test runner.  Sequence numbers are gapless per
 * server contract; on reconnect the client resumes with ?since=<last seq>,
 * so a dropped connection loses nothing.
 */

import type { FetchLike } from "./api.js";
import type { StreamFrame } from "./types.js";

export type StreamState = "connecting" | "live" | "stale";

export interface EventStreamOptions {
  url: string;
  onFrame: (frame: StreamFrame) => void;
  onState: (state: StreamState) => void;
  fetchFn?: FetchLike;
  /** Delay before a reconnect attempt. */
  retryMs?: number;
}

export class EventStream {
  private readonly fetchFn: FetchLike;
  private readonly retryMs: number;
  private lastSeq = -1;
  private stopped = true;
  private controller: AbortController | null = null;

  constructor(private readonly opts: EventStreamOptions) {
    this.fetchFn = opts.fetchFn ?? ((input, init) => globalThis.fetch(input, init));
    this.retryMs = opts.retryMs ?? 1000;
  }

  start(): void {
    if (!this.stopped) return;
    this.stopped = false;
    void this.loop();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
    this.controller = null;
  }

  private async loop(): Promise<void> {
    this.opts.onState("connecting");
    while (!this.stopped) {
      try {
        await this.consumeOnce();
      } catch {
        // fall through to retry
      }
      if (this.stopped) break;
      this.opts.onState("stale");
      await sleep(this.retryMs);
    }
  }

  private async consumeOnce(): Promise<void> {
    this.controller = new AbortController();
    const res = await this.fetchFn(`${this.opts.url}/v1/events?since=${this.lastSeq}`, {
      signal: this.controller.signal,
    });
    if (!res.ok || res.body === null) throw new Error(`stream failed: ${res.status}`);
    this.opts.onState("live");

    const reader = res.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { value, done } = await reader.read();
      if (done) return;
      buffer += decoder.decode(value, { stream: true });
      // Frames are separated by a blank line.
      for (;;) {
        const cut = buffer.indexOf("\n\n");
        if (cut < 0) break;
        const raw = buffer.slice(0, cut);
        buffer = buffer.slice(cut + 2);
        this.dispatch(raw);
      }
    }
  }

  private dispatch(rawFrame: string): void {
    for (const line of rawFrame.split("\n")) {
      if (!line.startsWith("data:")) continue;
      let frame: StreamFrame;
      try {
        frame = JSON.parse(line.slice(5)) as StreamFrame;
      } catch {
        continue;
      }
      if (typeof frame.seq !== "number" || frame.seq <= this.lastSeq) continue;
      this.lastSeq = frame.seq;
      this.opts.onFrame(frame);
    }
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
