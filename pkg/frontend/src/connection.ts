/**
 * Browser WebSocket wrapper with capped-backoff reconnect.
 *
 * The monitor is polling-free: this class only moves frames between the
 * socket and the Session; the server pushes everything else.
 */

export interface ConnectionHandlers {
  onOpen: () => void;
  onText: (text: string) => void;
  onDown: () => void;
}

export class Connection {
  private ws: WebSocket | null = null;
  private closed = false;
  private retryMs = 500;

  constructor(
    private readonly url: string,
    private readonly handlers: ConnectionHandlers,
  ) {}

  start(): void {
    this.open();
  }

  send(text: string): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(text);
    }
  }

  stop(): void {
    this.closed = true;
    this.ws?.close();
  }

  private open(): void {
    const ws = new WebSocket(this.url);
    this.ws = ws;

    ws.onopen = () => {
      this.retryMs = 500;
      this.handlers.onOpen();
    };
    ws.onmessage = (ev) => {
      if (typeof ev.data === "string") this.handlers.onText(ev.data);
    };
    ws.onclose = () => {
      this.ws = null;
      this.handlers.onDown();
      if (!this.closed) {
        setTimeout(() => this.open(), this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, 8000);
      }
    };
    ws.onerror = () => {
      // onclose follows and handles the retry
    };
  }
}

/** ws:// endpoint for the page's origin (the UI is served by maspc serve). */
export function defaultEndpoint(loc: Location): string {
  return loc.origin.replace(/^http/, "ws") + "/debug";
}
