// One live subscription over a websocket, with automatic reconnect.
// On every (re)open the server replays a full snapshot, so the owner clears
// its folded cache in onOpen and the stream rebuilds it from scratch.

import { backoffDelay } from "./backoff.js";
import { parseServerMessage, type ServerMessage, type SubscriptionRequest } from "./types.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface LiveSubscriptionOptions {
  url: string;
  request: SubscriptionRequest;
  onMessage: (msg: ServerMessage) => void;
  onOpen?: () => void;
  onStatus?: (status: "connecting" | "open" | "reconnecting") => void;
  socketFactory?: SocketFactory;
  setTimer?: typeof setTimeout;
}

export class LiveSubscription {
  private socket: SocketLike | null = null;
  private attempts = 0;
  private closed = false;
  private readonly opts: LiveSubscriptionOptions;

  constructor(opts: LiveSubscriptionOptions) {
    this.opts = opts;
  }

  start(): void {
    this.connect("connecting");
  }

  stop(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
  }

  private connect(phase: "connecting" | "reconnecting"): void {
    if (this.closed) return;
    this.opts.onStatus?.(phase);
    const factory = this.opts.socketFactory ?? ((url) => new WebSocket(url) as unknown as SocketLike);
    const socket = factory(this.opts.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      this.opts.onOpen?.();
      this.opts.onStatus?.("open");
      socket.send(JSON.stringify(this.opts.request));
    };
    socket.onmessage = (ev) => {
      const msg = parseServerMessage(String(ev.data));
      if (msg) this.opts.onMessage(msg);
    };
    socket.onerror = () => {
      // close follows; reconnect handled there
    };
    socket.onclose = () => {
      if (this.closed) return;
      const delay = backoffDelay(this.attempts);
      this.attempts += 1;
      const timer = this.opts.setTimer ?? setTimeout;
      timer(() => this.connect("reconnecting"), delay);
    };
  }
}
