/**
 * Protocol session: owns the seq counter, matches replies to pending
 * commands, and folds every server message into a SessionView.
 *
 * The class is transport-agnostic (it writes outbound frames through a
 * callback and is fed inbound frames as strings), so the same code runs in
 * the browser and in headless tests. All view state is derived from server
 * messages; nothing here simulates or computes values.
 */

import {
  ClientMessage,
  CommandKind,
  ErrorReply,
  FaultInfo,
  NodeListing,
  PauseLocation,
  PROTOCOL_VERSION,
  Scalar,
  ServerMessage,
  ValuesMessage,
  hasStateFields,
} from "./protocol.js";

export type ConnectionState = "connecting" | "connected" | "disconnected";

export interface VariableRow {
  name: string;
  type: string;
  value: Scalar;
  forced: boolean;
}

export interface Toast {
  code: string;
  message: string;
}

export interface SessionView {
  connection: ConnectionState;
  /** Protocol version confirmed by the hello reply; null before that. */
  established: string | null;
  nodes: NodeListing[];
  /** Subscribed rows in subscription order, updated in place by pushes. */
  rows: Map<string, VariableRow>;
  cycleCounter: number;
  mode: "paused" | "running";
  location: PauseLocation | null;
  fault: FaultInfo | null;
  /** Breakpoints confirmed by the server, keyed node|artifact|index. */
  breakpoints: Set<string>;
  toasts: Toast[];
}

export class ServerError extends Error {
  constructor(readonly code: string, message: string) {
    super(message);
    this.name = "ServerError";
  }
}

export function breakpointKey(node: string, artifact: string, index: number): string {
  return `${node.toLowerCase()}|${artifact.toLowerCase()}|${index}`;
}

interface Pending {
  kind: CommandKind;
  resolve: (reply: ServerMessage) => void;
  reject: (err: Error) => void;
}

const MAX_TOASTS = 5;

export class Session {
  readonly view: SessionView = {
    connection: "connecting",
    established: null,
    nodes: [],
    rows: new Map(),
    cycleCounter: 0,
    mode: "paused",
    location: null,
    fault: null,
    breakpoints: new Set(),
    toasts: [],
  };

  /** Last requested watch list; replayed by the caller after a reconnect. */
  watched: string[] = [];

  private seq = 0;
  private pending = new Map<number, Pending>();

  constructor(
    private readonly sendText: (text: string) => void,
    private readonly onChange: () => void = () => {},
  ) {}

  // -- commands ---------------------------------------------------------------

  hello(): Promise<ServerMessage> {
    return this.command("hello", { protocol: PROTOCOL_VERSION });
  }

  subscribe(names: string[], decimation = 1): Promise<ServerMessage> {
    this.watched = [...names];
    return this.command("subscribe", { names, decimation });
  }

  force(name: string, value: Scalar): Promise<ServerMessage> {
    return this.command("force", { name, value });
  }

  unforce(name: string): Promise<ServerMessage> {
    return this.command("unforce", { name });
  }

  setBreakpoint(artifact: string, index: number, node?: string): Promise<ServerMessage> {
    return this.command("setBreakpoint", { artifact, index, ...(node ? { node } : {}) });
  }

  clearBreakpoint(artifact: string, index: number, node?: string): Promise<ServerMessage> {
    return this.command("clearBreakpoint", { artifact, index, ...(node ? { node } : {}) });
  }

  run(intervalMs = 0): Promise<ServerMessage> {
    return this.command("run", { intervalMs });
  }

  pause(): Promise<ServerMessage> {
    return this.command("pause", {});
  }

  stepCycle(): Promise<ServerMessage> {
    return this.command("stepCycle", {});
  }

  stepStatement(): Promise<ServerMessage> {
    return this.command("stepStatement", {});
  }

  /** True when a breakpoint is confirmed on (node, artifact, index). */
  hasBreakpoint(node: string, artifact: string, index: number): boolean {
    return this.view.breakpoints.has(breakpointKey(node, artifact, index));
  }

  /** Surface a client-side problem in the toast area. */
  notify(code: string, message: string): void {
    this.pushToast(code, message);
    this.onChange();
  }

  /**
   * One user action, one outbound message, one seq-matched reply. The view
   * changes only when the reply (or a later push) arrives.
   */
  private command(kind: CommandKind, fields: Record<string, unknown>): Promise<ServerMessage> {
    const seq = this.seq++;
    const message: ClientMessage = { seq, kind, ...fields };
    const promise = new Promise<ServerMessage>((resolve, reject) => {
      this.pending.set(seq, { kind, resolve, reject });
    });
    this.sendText(JSON.stringify(message));
    return promise;
  }

  // -- connection lifecycle ---------------------------------------------------

  setConnection(state: ConnectionState): void {
    this.view.connection = state;
    if (state !== "connected") {
      this.view.established = null;
      const error = new ServerError("E_CONNECTION", "connection lost");
      for (const entry of this.pending.values()) entry.reject(error);
      this.pending.clear();
      this.seq = 0;
    }
    this.onChange();
  }

  // -- inbound ----------------------------------------------------------------

  handleText(text: string): void {
    let msg: ServerMessage;
    try {
      msg = JSON.parse(text) as ServerMessage;
    } catch {
      this.pushToast("E_PROTOCOL", "unparseable server message");
      this.onChange();
      return;
    }
    this.apply(msg);
    this.onChange();
  }

  private apply(msg: ServerMessage): void {
    if (hasStateFields(msg)) {
      this.view.cycleCounter = msg.cycleCounter;
      this.view.mode = msg.mode;
      this.view.location = msg.location ?? null;
      this.view.fault = msg.fault ?? null;
    }

    switch (msg.kind) {
      case "error": {
        this.pushToast(msg.code, msg.message);
        this.settle(msg.seq, null, msg);
        return;
      }
      case "hello": {
        this.view.established = msg.protocol;
        this.view.nodes = msg.nodes;
        break;
      }
      case "values": {
        this.applyValues(msg);
        break;
      }
      case "force": {
        const row = this.view.rows.get(msg.name);
        if (row) {
          row.value = msg.value;
          row.forced = true;
        }
        break;
      }
      case "unforce": {
        const row = this.view.rows.get(msg.name);
        if (row) row.forced = false;
        break;
      }
      case "setBreakpoint":
      case "clearBreakpoint": {
        for (const node of msg.nodes) {
          const key = breakpointKey(node, msg.artifact, msg.index);
          if (msg.kind === "setBreakpoint") this.view.breakpoints.add(key);
          else this.view.breakpoints.delete(key);
        }
        break;
      }
      case "event": {
        if (msg.event === "fault") {
          this.pushToast(msg.code, `${msg.node}: ${msg.message}`);
        }
        // breakpointHit needs no extra handling: the event's state fields
        // already flipped mode/location above.
        break;
      }
      default:
        break;
    }

    const seq = (msg as { seq?: number }).seq;
    this.settle(seq, msg, null);
  }

  private applyValues(msg: ValuesMessage): void {
    for (const [name, entry] of Object.entries(msg.values)) {
      const row = this.view.rows.get(name);
      if (row) {
        row.value = entry.value;
        row.type = entry.type;
        row.forced = entry.forced;
      } else {
        this.view.rows.set(name, { name, ...entry });
      }
    }
    // drop rows the server no longer reports (watch list was replaced)
    for (const name of [...this.view.rows.keys()]) {
      if (!(name in msg.values)) this.view.rows.delete(name);
    }
  }

  private settle(seq: number | undefined, reply: ServerMessage | null, error: ErrorReply | null): void {
    if (seq === undefined) return;
    const entry = this.pending.get(seq);
    if (!entry) return;
    this.pending.delete(seq);
    if (error !== null) entry.reject(new ServerError(error.code, error.message));
    else if (reply !== null) entry.resolve(reply);
  }

  private pushToast(code: string, message: string): void {
    this.view.toasts.push({ code, message });
    if (this.view.toasts.length > MAX_TOASTS) this.view.toasts.shift();
  }
}
