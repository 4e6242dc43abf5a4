// Transports carry framed protocol bytes over a duplex stream. The gateway
// listens on plain TCP; TcpTransport (Node) speaks to it directly and is what
// the integration tests use. WebSocketTransport suits browsers sitting behind
// a TCP-to-WebSocket bridge (e.g. websockify) that relays the raw bytes.

import { FrameDecoder, encodeFrame } from "./protocol.js";

export type TransportState = "connecting" | "connected" | "disconnected";

export interface Transport {
  send(message: unknown): void;
  onMessage(handler: (msg: unknown) => void): void;
  onStateChange(handler: (state: TransportState) => void): void;
  close(): void;
}

export class TcpTransport implements Transport {
  private decoder = new FrameDecoder();
  private messageHandler: ((msg: unknown) => void) | null = null;
  private stateHandler: ((state: TransportState) => void) | null = null;
  private socket: import("node:net").Socket | null = null;
  private state: TransportState = "connecting";

  constructor(private readonly host: string, private readonly port: number) {}

  async connect(): Promise<void> {
    const net = await import("node:net");
    this.setState("connecting");
    this.socket = net.createConnection({ host: this.host, port: this.port });
    this.socket.on("connect", () => this.setState("connected"));
    this.socket.on("data", (chunk: Buffer) => {
      for (const msg of this.decoder.feed(new Uint8Array(chunk))) {
        this.messageHandler?.(msg);
      }
    });
    this.socket.on("error", () => this.setState("disconnected"));
    this.socket.on("close", () => this.setState("disconnected"));
  }

  private setState(state: TransportState) {
    this.state = state;
    this.stateHandler?.(state);
  }

  send(message: unknown): void {
    if (this.socket && this.state === "connected") {
      this.socket.write(encodeFrame(message));
    }
  }

  onMessage(handler: (msg: unknown) => void): void {
    this.messageHandler = handler;
  }

  onStateChange(handler: (state: TransportState) => void): void {
    this.stateHandler = handler;
    handler(this.state);
  }

  close(): void {
    this.socket?.destroy();
    this.socket = null;
  }
}

export class WebSocketTransport implements Transport {
  private decoder = new FrameDecoder();
  private messageHandler: ((msg: unknown) => void) | null = null;
  private stateHandler: ((state: TransportState) => void) | null = null;
  private ws: WebSocket | null = null;

  constructor(private readonly url: string) {}

  connect(): void {
    this.stateHandler?.("connecting");
    this.ws = new WebSocket(this.url);
    this.ws.binaryType = "arraybuffer";
    this.ws.onopen = () => this.stateHandler?.("connected");
    this.ws.onclose = () => this.stateHandler?.("disconnected");
    this.ws.onerror = () => this.stateHandler?.("disconnected");
    this.ws.onmessage = (event) => {
      const bytes = typeof event.data === "string"
        ? new TextEncoder().encode(event.data)
        : new Uint8Array(event.data as ArrayBuffer);
      for (const msg of this.decoder.feed(bytes)) {
        this.messageHandler?.(msg);
      }
    };
  }

  send(message: unknown): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(encodeFrame(message));
    }
  }

  onMessage(handler: (msg: unknown) => void): void {
    this.messageHandler = handler;
  }

  onStateChange(handler: (state: TransportState) => void): void {
    this.stateHandler = handler;
  }

  close(): void {
    this.ws?.close();
    this.ws = null;
  }
}

export interface ReconnectOptions {
  initialDelayMs?: number;
  maxDelayMs?: number;
  setTimeout?: typeof globalThis.setTimeout;
}

/** Wraps a transport factory with exponential backoff reconnects and replays
 * the hello handshake on every new connection. */
export class ReconnectingClient {
  private transport: Transport | null = null;
  private messageHandler: ((msg: unknown) => void) | null = null;
  private stateHandler: ((state: TransportState) => void) | null = null;
  private delay: number;
  private stopped = false;
  attempts = 0;

  constructor(
    private readonly factory: () => Transport | Promise<Transport>,
    private readonly hello: unknown,
    private readonly options: ReconnectOptions = {},
  ) {
    this.delay = options.initialDelayMs ?? 500;
  }

  async start(): Promise<void> {
    if (this.stopped) return;
    this.attempts += 1;
    const transport = await this.factory();
    this.transport = transport;
    transport.onMessage((msg) => this.messageHandler?.(msg));
    transport.onStateChange((state) => {
      this.stateHandler?.(state);
      if (state === "connected") {
        this.delay = this.options.initialDelayMs ?? 500;
        transport.send(this.hello);
      } else if (state === "disconnected" && !this.stopped) {
        const wait = this.delay;
        this.delay = Math.min(this.delay * 2, this.options.maxDelayMs ?? 10_000);
        const timer = this.options.setTimeout ?? globalThis.setTimeout.bind(globalThis);
        timer(() => void this.start(), wait);
      }
    });
  }

  send(message: unknown): void {
    this.transport?.send(message);
  }

  onMessage(handler: (msg: unknown) => void): void {
    this.messageHandler = handler;
  }

  onStateChange(handler: (state: TransportState) => void): void {
    this.stateHandler = handler;
  }

  stop(): void {
    this.stopped = true;
    this.transport?.close();
  }
}
