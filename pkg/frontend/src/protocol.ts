/**
 * Message types for maspc-debug/1.
 *
 * One JSON object per WebSocket text frame. Client messages carry a
 * monotonically increasing `seq`; the server echoes it in exactly one reply.
 * Broadcasts (values pushes, events) carry no `seq`. See docs/protocol.md
 * in the repository root for the full wire specification.
 */

export const PROTOCOL_VERSION = "maspc-debug/1";
export const WS_PATH = "/debug";

export type Scalar = boolean | number;
export type Mode = "paused" | "running";

export interface PauseLocation {
  node: string;
  artifact: string;
  statementIndex: number;
  path: string;
}

export interface FaultInfo {
  code: string;
  message: string;
  node: string;
  cycle: number;
  artifact: string;
  statementIndex: number;
}

/** Simulation state attached to every reply and broadcast. */
export interface StateFields {
  cycleCounter: number;
  mode: Mode;
  location?: PauseLocation;
  fault?: FaultInfo;
}

// -- client -> server --------------------------------------------------------

export type CommandKind =
  | "hello"
  | "subscribe"
  | "force"
  | "unforce"
  | "setBreakpoint"
  | "clearBreakpoint"
  | "run"
  | "pause"
  | "stepCycle"
  | "stepStatement";

export interface ClientMessage {
  seq: number;
  kind: CommandKind;
  [field: string]: unknown;
}

// -- server -> client --------------------------------------------------------

export interface StatementLine {
  index: number;
  line: number;
}

export interface ArtifactListing {
  name: string;
  kind: "program" | "function_block" | "function";
  breakable: boolean;
  text: string;
  statements: StatementLine[];
}

export interface NodeListing {
  name: string;
  program: string;
  artifacts: ArtifactListing[];
  variables: string[];
}

export interface HelloReply extends StateFields {
  kind: "hello";
  seq: number;
  protocol: string;
  nodes: NodeListing[];
}

export interface ValueEntry {
  value: Scalar;
  type: string;
  forced: boolean;
}

/** Subscribe reply (with seq) and per-cycle push (without). */
export interface ValuesMessage extends StateFields {
  kind: "values";
  seq?: number;
  values: Record<string, ValueEntry>;
}

export interface ForceReply extends StateFields {
  kind: "force";
  seq: number;
  name: string;
  value: Scalar;
}

export interface UnforceReply extends StateFields {
  kind: "unforce";
  seq: number;
  name: string;
}

export interface BreakpointReply extends StateFields {
  kind: "setBreakpoint" | "clearBreakpoint";
  seq: number;
  artifact: string;
  index: number;
  nodes: string[];
}

export interface SteppingReply extends StateFields {
  kind: "run" | "pause" | "stepCycle" | "stepStatement";
  seq: number;
}

export interface ErrorReply {
  kind: "error";
  seq?: number;
  code: string;
  message: string;
}

export interface BreakpointHitEvent extends StateFields {
  kind: "event";
  event: "breakpointHit";
  node: string;
  artifact: string;
  statementIndex: number;
  path: string;
}

export interface FaultEvent extends StateFields, FaultInfo {
  kind: "event";
  event: "fault";
}

export type ServerEvent = BreakpointHitEvent | FaultEvent;

export type ServerMessage =
  | HelloReply
  | ValuesMessage
  | ForceReply
  | UnforceReply
  | BreakpointReply
  | SteppingReply
  | ErrorReply
  | ServerEvent;

export function hasStateFields(msg: ServerMessage): msg is ServerMessage & StateFields {
  return typeof (msg as StateFields).cycleCounter === "number";
}
