/**
 * Session lifecycle over the message-oriented listener: HELLO, snapshot
 * request, history replay, then live merge. Connection loss surfaces as a
 * status banner and triggers an automatic rejoin that rebuilds the
 * replica from a fresh snapshot (no hidden local state survives).
 */

import { serializeCommand as serialize } from "./commands.js";
import { decodeFrame, encodeFrame, ProtocolError } from "./frames.js";
import { randomUuid } from "./ids.js";
import { ModelReplica } from "./replica.js";
import type { ApplyResult } from "./replica.js";
import type { Command } from "./commands.js";
import type { Stamp } from "./stamps.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SessionState = "connecting" | "replay" | "live" | "closed";

export interface SessionOptions {
  socketFactory?: (url: string) => SocketLike;
  onChange?: () => void;
  onStatus?: (state: SessionState, detail: string) => void;
  autoRejoin?: boolean;
  rejoinDelayMs?: number;
}

class MonotonicClock {
  private last = 0n;

  next(): bigint {
    let now = BigInt(Date.now()) * 1_000_000n;
    if (now <= this.last) now = this.last + 1n;
    this.last = now;
    return now;
  }
}

export class EditorSession {
  readonly clientId = randomUuid();
  replica = new ModelReplica();
  state: SessionState = "connecting";
  errors: string[] = [];
  merged = 0;

  private socket: SocketLike | null = null;
  private readonly clock = new MonotonicClock();
  private userClosed = false;
  private readonly opts: Required<SessionOptions>;

  constructor(readonly url: string, options: SessionOptions = {}) {
    this.opts = {
      socketFactory: options.socketFactory ??
        ((u: string) => new WebSocket(u) as unknown as SocketLike),
      onChange: options.onChange ?? (() => {}),
      onStatus: options.onStatus ?? (() => {}),
      autoRejoin: options.autoRejoin ?? true,
      rejoinDelayMs: options.rejoinDelayMs ?? 1000,
    };
  }

  connect(): void {
    this.state = "connecting";
    this.replica = new ModelReplica();   // a join is always a fresh snapshot
    this.opts.onStatus(this.state, "connecting");
    const socket = this.opts.socketFactory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      socket.send(encodeFrame({ kind: "HELLO", clientId: this.clientId }));
      socket.send(encodeFrame({ kind: "SREQ" }));
    };
    socket.onmessage = (ev) => {
      const text = typeof ev.data === "string" ? ev.data : String(ev.data);
      try {
        this.handleLine(text);
      } catch (err) {
        this.errors.push(String(err));
      }
    };
    socket.onerror = () => { /* onclose follows */ };
    socket.onclose = () => {
      if (this.userClosed) return;
      this.state = "connecting";
      this.opts.onStatus("connecting",
                         "connection lost; rejoining with a fresh snapshot");
      if (this.opts.autoRejoin) {
        setTimeout(() => {
          if (!this.userClosed) this.connect();
        }, this.opts.rejoinDelayMs);
      }
    };
  }

  /** Resolves once the snapshot replay completed. */
  whenLive(timeoutMs = 10_000): Promise<void> {
    return new Promise((resolve, reject) => {
      const started = Date.now();
      const tick = () => {
        if (this.state === "live") return resolve();
        if (Date.now() - started > timeoutMs) {
          return reject(new Error("session did not reach live state"));
        }
        setTimeout(tick, 10);
      };
      tick();
    });
  }

  handleLine(line: string): void {
    const frame = decodeFrame(line);
    switch (frame.kind) {
      case "SBEG":
        if (this.state !== "connecting") throw new ProtocolError("unexpected SBEG");
        this.state = "replay";
        this.opts.onStatus(this.state, "replaying history");
        break;
      case "SEND":
        if (this.state !== "replay") throw new ProtocolError("unexpected SEND");
        this.state = "live";
        this.opts.onStatus(this.state, "live");
        this.opts.onChange();
        break;
      case "U":
        if (this.state === "connecting") break;  // replay will contain it
        // Live echoes of our own frames were already applied locally;
        // during a replay the replica is fresh, so our own history (from
        // before a reconnect) must apply like anyone else's.
        if (this.state === "live" && frame.clientId === this.clientId) break;
        this.replica.applyFrame(frame);
        this.merged++;
        if (this.state === "live") this.opts.onChange();
        break;
      default:
        throw new ProtocolError(`unexpected frame: ${line}`);
    }
  }

  /** Optimistic local apply, then publish exactly one command frame. */
  submit(cmd: Command): ApplyResult {
    if (this.state !== "live") {
      return { ok: false, error: `session is ${this.state}` };
    }
    const stamp: Stamp = { nanos: this.clock.next(), replica: this.clientId };
    const result = this.replica.applyLocal(cmd, stamp);
    if (!result.ok || !result.effective) return result;
    this.socket!.send(encodeFrame({
      kind: "U", clientId: this.clientId, stamp,
      command: serialize(result.effective),
    }));
    this.opts.onChange();
    return result;
  }

  close(): void {
    this.userClosed = true;
    this.state = "closed";
    this.socket?.close();
  }

  /** Drop the transport as if the network failed (testing aid). */
  simulateConnectionLoss(): void {
    this.socket?.close();
  }
}
