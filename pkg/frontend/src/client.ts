// Session client: command/ack bookkeeping over a WebSocket-like transport.
// The transport is injected so tests can drive the client with a fake.

import type {
  AckMsg,
  Command,
  ContourMsg,
  ErrorMsg,
  HelloMsg,
  LogMsg,
  ScheduleRow,
  ServerMsg,
  StateFrame,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: string }) => void) | null;
  onopen: ((ev: unknown) => void) | null;
  onclose: ((ev: unknown) => void) | null;
  onerror: ((ev: unknown) => void) | null;
}

export type CommandReply = AckMsg | ErrorMsg | ContourMsg | LogMsg | {
  type: string;
  [k: string]: unknown;
};

interface Pending {
  resolve: (reply: CommandReply) => void;
  reject: (err: Error) => void;
  sentAt: number;
  timer: ReturnType<typeof setTimeout>;
}

export interface SessionClientOptions {
  ackTimeoutMs?: number;
  now?: () => number;
}

export class SessionClient {
  hello: HelloMsg | null = null;
  onFrame: ((frame: StateFrame) => void) | null = null;
  onServerError: ((err: ErrorMsg) => void) | null = null;
  onClose: (() => void) | null = null;
  lastRoundTripMs = 0;

  private sock: SocketLike;
  private pending = new Map<string, Pending>();
  private tagCounter = 0;
  private ackTimeoutMs: number;
  private now: () => number;

  constructor(sock: SocketLike, opts: SessionClientOptions = {}) {
    this.sock = sock;
    this.ackTimeoutMs = opts.ackTimeoutMs ?? 2000;
    this.now = opts.now ?? (() => Date.now());
    sock.onmessage = (ev) => this.handleMessage(ev.data);
    sock.onclose = () => {
      for (const p of this.pending.values()) {
        clearTimeout(p.timer);
        p.reject(new Error("connection closed"));
      }
      this.pending.clear();
      if (this.onClose) this.onClose();
    };
  }

  // every command gets a fresh tag; the promise resolves on the reply that
  // echoes it (ack, error, or a full reply frame like contour/log)
  send(type: string, payload?: Record<string, unknown>): Promise<CommandReply> {
    const tag = `c${++this.tagCounter}`;
    const cmd: Command = { type, payload, client_tag: tag };
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        this.pending.delete(tag);
        reject(new Error(`no reply to ${type} within ${this.ackTimeoutMs} ms`));
      }, this.ackTimeoutMs);
      this.pending.set(tag, { resolve, reject, sentAt: this.now(), timer });
      this.sock.send(JSON.stringify(cmd));
    });
  }

  async exportSchedule(): Promise<ScheduleRow[]> {
    const reply = await this.send("export-log");
    if (reply.type !== "log") {
      throw new Error(`expected log reply, got ${reply.type}`);
    }
    return (reply as LogMsg).schedule;
  }

  close(): void {
    this.sock.close();
  }

  private handleMessage(data: string): void {
    let msg: ServerMsg;
    try {
      msg = JSON.parse(data);
    } catch {
      return; // not ours to crash on
    }
    if (msg.type === "hello") {
      this.hello = msg as HelloMsg;
      return;
    }
    if (msg.type === "state") {
      if (this.onFrame) this.onFrame(msg as StateFrame);
      return;
    }
    const tag = (msg as { client_tag?: string | null }).client_tag;
    if (tag && this.pending.has(tag)) {
      const p = this.pending.get(tag)!;
      this.pending.delete(tag);
      clearTimeout(p.timer);
      this.lastRoundTripMs = this.now() - p.sentAt;
      if (msg.type === "error") {
        p.reject(new Error(`${(msg as ErrorMsg).code}: ${(msg as ErrorMsg).message}`));
      } else {
        p.resolve(msg as CommandReply);
      }
      return;
    }
    if (msg.type === "error" && this.onServerError) {
      this.onServerError(msg as ErrorMsg);
    }
  }
}
