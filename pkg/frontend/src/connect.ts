import { Session } from "./session.js";

export interface ConnectOptions {
  url: string;
  /** Called whenever the session state may have changed. */
  onChange: () => void;
}

const RETRY_MIN_MS = 500;
const RETRY_MAX_MS = 8000;

/**
 * Read-only socket wiring. Messages go straight into the session; the
 * renderer is poked through onChange and picks the state up on its next
 * animation frame. Reconnects with doubling backoff until an end frame
 * arrives, after which the session is complete and reconnecting would
 * only replay the tail.
 */
export class StreamConnection {
  private ws: WebSocket | null = null;
  private retryMs = RETRY_MIN_MS;
  private stopped = false;

  constructor(private session: Session, private opts: ConnectOptions) {}

  start(): void {
    this.open();
  }

  stop(): void {
    this.stopped = true;
    this.ws?.close();
  }

  private open(): void {
    const ws = new WebSocket(this.opts.url);
    this.ws = ws;

    ws.onopen = () => {
      this.retryMs = RETRY_MIN_MS;
      this.session.noteConnected();
      this.opts.onChange();
    };

    ws.onmessage = (event: MessageEvent) => {
      if (typeof event.data === "string" && this.session.handleMessage(event.data)) {
        this.opts.onChange();
      }
    };

    ws.onclose = () => {
      if (this.stopped || this.session.getState().phase === "ended") {
        this.opts.onChange();
        return;
      }
      this.session.noteDisconnected();
      this.opts.onChange();
      window.setTimeout(() => this.open(), this.retryMs);
      this.retryMs = Math.min(this.retryMs * 2, RETRY_MAX_MS);
    };

    ws.onerror = () => {
      // onclose follows and owns the retry
    };
  }
}
