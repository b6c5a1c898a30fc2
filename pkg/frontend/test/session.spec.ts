import { describe, expect, it } from "vitest";

import { PROTOCOL_VERSION } from "../src/protocol.js";
import { ServerError, Session, breakpointKey } from "../src/session.js";

/** Session wired to capture arrays instead of a socket. */
function harness() {
  const sent: Record<string, unknown>[] = [];
  let changes = 0;
  const session = new Session(
    (text) => sent.push(JSON.parse(text)),
    () => changes++,
  );
  const reply = (msg: object) => session.handleText(JSON.stringify(msg));
  return { session, sent, reply, changes: () => changes };
}

function statefields(extra: object = {}) {
  return { cycleCounter: 0, mode: "paused", ...extra };
}

const HELLO_NODES = [
  {
    name: "PlcA",
    program: "Main",
    artifacts: [
      {
        name: "Main",
        kind: "program",
        breakable: true,
        text: "PROGRAM Main\nEND_PROGRAM\n",
        statements: [{ index: 0, line: 1 }],
      },
    ],
    variables: ["PlcA.Main.X", "PlcA.Main.Inst.Y"],
  },
];

describe("command/echo discipline", () => {
  it("sends exactly one message per action, with fresh increasing seqs", () => {
    const { session, sent } = harness();
    session.hello().catch(() => {});
    session.subscribe(["PlcA.Main.X"]).catch(() => {});
    session.force("PlcA.Main.X", 7).catch(() => {});
    session.stepCycle().catch(() => {});
    expect(sent).toHaveLength(4);
    expect(sent.map((m) => m.seq)).toEqual([0, 1, 2, 3]);
    expect(sent.map((m) => m.kind)).toEqual(["hello", "subscribe", "force", "stepCycle"]);
  });

  it("hello carries the protocol version", () => {
    const { session, sent } = harness();
    session.hello().catch(() => {});
    expect(sent[0]).toMatchObject({ kind: "hello", protocol: PROTOCOL_VERSION });
  });

  it("resolves each command on its seq-matched reply, regardless of order", async () => {
    const { session, reply } = harness();
    const first = session.stepCycle();
    const second = session.stepCycle();
    reply({ kind: "stepCycle", seq: 1, ...statefields({ cycleCounter: 2 }) });
    reply({ kind: "stepCycle", seq: 0, ...statefields({ cycleCounter: 1 }) });
    const [a, b] = await Promise.all([first, second]);
    expect((a as { seq: number }).seq).toBe(0);
    expect((b as { seq: number }).seq).toBe(1);
  });

  it("ignores replies for unknown seqs", () => {
    const { session, reply } = harness();
    reply({ kind: "stepCycle", seq: 99, ...statefields() });
    expect(session.view.cycleCounter).toBe(0);
  });
});

describe("live table", () => {
  it("one variable in the payload makes one row with its value", () => {
    const { session, reply } = harness();
    reply({
      kind: "values",
      values: { "PlcA.Main.X": { value: 123, type: "INT", forced: false } },
      ...statefields({ cycleCounter: 4 }),
    });
    expect(session.view.rows.size).toBe(1);
    const row = session.view.rows.get("PlcA.Main.X")!;
    expect(row.value).toBe(123);
    expect(row.type).toBe("INT");
    expect(row.forced).toBe(false);
    expect(session.view.cycleCounter).toBe(4);
  });

  it("a forced row carries the forced flag and the forced value", () => {
    const { reply, session } = harness();
    reply({
      kind: "values",
      values: { "PlcA.Main.X": { value: 90.5, type: "REAL", forced: true } },
      ...statefields(),
    });
    const row = session.view.rows.get("PlcA.Main.X")!;
    expect(row.forced).toBe(true);
    expect(row.value).toBe(90.5);
  });

  it("updates rows in place, preserving subscription order", () => {
    const { session, reply } = harness();
    const push = (x: number, y: number) =>
      reply({
        kind: "values",
        values: {
          "PlcA.Main.X": { value: x, type: "INT", forced: false },
          "PlcA.Main.Y": { value: y, type: "INT", forced: false },
        },
        ...statefields(),
      });
    push(1, 2);
    push(3, 4);
    expect([...session.view.rows.keys()]).toEqual(["PlcA.Main.X", "PlcA.Main.Y"]);
    expect(session.view.rows.get("PlcA.Main.X")!.value).toBe(3);
  });

  it("drops rows missing from the payload after the watch list changed", () => {
    const { session, reply } = harness();
    reply({
      kind: "values",
      values: {
        "PlcA.Main.X": { value: 1, type: "INT", forced: false },
        "PlcA.Main.Y": { value: 2, type: "INT", forced: false },
      },
      ...statefields(),
    });
    reply({
      kind: "values",
      values: { "PlcA.Main.Y": { value: 2, type: "INT", forced: false } },
      ...statefields(),
    });
    expect([...session.view.rows.keys()]).toEqual(["PlcA.Main.Y"]);
  });

  it("never invents a row the server did not report", async () => {
    const { session, reply } = harness();
    const pending = session.force("PlcA.Main.Hidden", 5);
    reply({
      kind: "force", seq: 0, name: "PlcA.Main.Hidden", value: 5,
      ...statefields(),
    });
    await pending;
    expect(session.view.rows.size).toBe(0);
  });
});

describe("force and unforce", () => {
  it("flags the row only after the server reply (no optimistic state)", async () => {
    const { session, reply } = harness();
    reply({
      kind: "values",
      values: { "PlcA.Main.X": { value: 1, type: "INT", forced: false } },
      ...statefields(),
    });
    const pending = session.force("PlcA.Main.X", 42);
    expect(session.view.rows.get("PlcA.Main.X")!.forced).toBe(false);
    expect(session.view.rows.get("PlcA.Main.X")!.value).toBe(1);
    reply({ kind: "force", seq: 0, name: "PlcA.Main.X", value: 42, ...statefields() });
    await pending;
    const row = session.view.rows.get("PlcA.Main.X")!;
    expect(row.forced).toBe(true);
    expect(row.value).toBe(42);
  });

  it("unforce clears the flag but keeps the last reported value", async () => {
    const { session, reply } = harness();
    reply({
      kind: "values",
      values: { "PlcA.Main.X": { value: 42, type: "INT", forced: true } },
      ...statefields(),
    });
    const pending = session.unforce("PlcA.Main.X");
    reply({ kind: "unforce", seq: 0, name: "PlcA.Main.X", ...statefields() });
    await pending;
    const row = session.view.rows.get("PlcA.Main.X")!;
    expect(row.forced).toBe(false);
    expect(row.value).toBe(42);
  });
});

describe("errors", () => {
  it("a server error rejects the command and leaves the view unchanged", async () => {
    const { session, reply } = harness();
    reply({
      kind: "values",
      values: { "PlcA.Main.X": { value: 1, type: "INT", forced: false } },
      ...statefields({ mode: "running", cycleCounter: 3 }),
    });
    const before = {
      mode: session.view.mode,
      cycle: session.view.cycleCounter,
      value: session.view.rows.get("PlcA.Main.X")!.value,
    };
    const pending = session.stepCycle();
    reply({
      kind: "error", seq: 0, code: "E_BAD_STATE",
      message: "'stepCycle' requires a paused simulation",
    });
    await expect(pending).rejects.toThrow(ServerError);
    await expect(pending).rejects.toMatchObject({ code: "E_BAD_STATE" });
    expect(session.view.mode).toBe(before.mode);
    expect(session.view.cycleCounter).toBe(before.cycle);
    expect(session.view.rows.get("PlcA.Main.X")!.value).toBe(before.value);
  });

  it("renders server error codes as toasts", async () => {
    const { session, reply } = harness();
    const pending = session.run();
    reply({ kind: "error", seq: 0, code: "E_BAD_STATE", message: "no" });
    await pending.catch(() => {});
    expect(session.view.toasts).toEqual([{ code: "E_BAD_STATE", message: "no" }]);
  });

  it("keeps only the most recent toasts", () => {
    const { session, reply } = harness();
    for (let i = 0; i < 8; i++) {
      reply({ kind: "error", code: "E_PROTOCOL", message: `m${i}` });
    }
    expect(session.view.toasts).toHaveLength(5);
    expect(session.view.toasts[0]!.message).toBe("m3");
  });

  it("survives an unparseable server frame with a toast", () => {
    const { session } = harness();
    session.handleText("not json at all");
    expect(session.view.toasts[0]!.code).toBe("E_PROTOCOL");
  });
});

describe("breakpoints", () => {
  it("toggling twice sends set then clear and removes the badge state", async () => {
    const { session, sent, reply } = harness();
    const setP = session.setBreakpoint("Main", 2, "PlcA");
    reply({
      kind: "setBreakpoint", seq: 0, artifact: "Main", index: 2,
      nodes: ["PlcA"], ...statefields(),
    });
    await setP;
    expect(session.hasBreakpoint("PlcA", "Main", 2)).toBe(true);

    const clearP = session.clearBreakpoint("Main", 2, "PlcA");
    reply({
      kind: "clearBreakpoint", seq: 1, artifact: "Main", index: 2,
      nodes: ["PlcA"], ...statefields(),
    });
    await clearP;
    expect(sent.map((m) => m.kind)).toEqual(["setBreakpoint", "clearBreakpoint"]);
    expect(session.hasBreakpoint("PlcA", "Main", 2)).toBe(false);
    expect(session.view.breakpoints.size).toBe(0);
  });

  it("a breakpoint applied on several nodes marks each of them", async () => {
    const { session, reply } = harness();
    const pending = session.setBreakpoint("Main", 0);
    reply({
      kind: "setBreakpoint", seq: 0, artifact: "Main", index: 0,
      nodes: ["PlcA", "PlcB"], ...statefields(),
    });
    await pending;
    expect(session.hasBreakpoint("PlcA", "Main", 0)).toBe(true);
    expect(session.hasBreakpoint("PlcB", "Main", 0)).toBe(true);
  });

  it("matches breakpoint keys case-insensitively, like the server", () => {
    expect(breakpointKey("PlcA", "Main", 1)).toBe(breakpointKey("plca", "MAIN", 1));
  });

  it("a breakpointHit event switches the view to paused with the location", () => {
    const { session, reply } = harness();
    reply({
      kind: "event", event: "breakpointHit", node: "PlcA", artifact: "Main",
      statementIndex: 2, path: "Main",
      ...statefields({
        mode: "paused", cycleCounter: 7,
        location: { node: "PlcA", artifact: "Main", statementIndex: 2, path: "Main" },
      }),
    });
    expect(session.view.mode).toBe("paused");
    expect(session.view.location).toEqual({
      node: "PlcA", artifact: "Main", statementIndex: 2, path: "Main",
    });
    expect(session.view.cycleCounter).toBe(7);
  });
});

describe("session state", () => {
  it("hello populates the node listing and the protocol tag", async () => {
    const { session, reply } = harness();
    const pending = session.hello();
    reply({
      kind: "hello", seq: 0, protocol: PROTOCOL_VERSION, nodes: HELLO_NODES,
      ...statefields(),
    });
    await pending;
    expect(session.view.established).toBe(PROTOCOL_VERSION);
    expect(session.view.nodes).toHaveLength(1);
    expect(session.view.nodes[0]!.artifacts[0]!.breakable).toBe(true);
  });

  it("a fault event surfaces as state plus a toast", () => {
    const { session, reply } = harness();
    const fault = {
      code: "E_RUNTIME", message: "division by zero", node: "PlcA",
      cycle: 3, artifact: "Main", statementIndex: 1,
    };
    reply({
      kind: "event", event: "fault", ...fault,
      ...statefields({ cycleCounter: 3, fault }),
    });
    expect(session.view.fault?.message).toBe("division by zero");
    expect(session.view.toasts[0]!.code).toBe("E_RUNTIME");
  });

  it("state fields track the most recent message", () => {
    const { session, reply } = harness();
    reply({ kind: "values", values: {}, ...statefields({ cycleCounter: 5, mode: "running" }) });
    expect(session.view.mode).toBe("running");
    expect(session.view.cycleCounter).toBe(5);
    reply({
      kind: "values", values: {},
      ...statefields({
        cycleCounter: 6,
        location: { node: "PlcA", artifact: "Main", statementIndex: 0, path: "Main" },
      }),
    });
    expect(session.view.mode).toBe("paused");
    expect(session.view.location?.statementIndex).toBe(0);
    reply({ kind: "values", values: {}, ...statefields({ cycleCounter: 7 }) });
    expect(session.view.location).toBeNull();
  });

  it("connection loss rejects pending commands and resets the handshake", async () => {
    const { session, reply } = harness();
    const helloP = session.hello();
    reply({
      kind: "hello", seq: 0, protocol: PROTOCOL_VERSION, nodes: [],
      ...statefields(),
    });
    await helloP;
    const pending = session.stepCycle();
    session.setConnection("disconnected");
    await expect(pending).rejects.toMatchObject({ code: "E_CONNECTION" });
    expect(session.view.connection).toBe("disconnected");
    expect(session.view.established).toBeNull();
  });

  it("restarts seq numbering on a fresh connection", async () => {
    const { session, sent } = harness();
    session.hello().catch(() => {});
    session.stepCycle().catch(() => {});
    session.setConnection("disconnected");
    session.setConnection("connected");
    session.hello().catch(() => {});
    expect(sent.map((m) => m.seq)).toEqual([0, 1, 0]);
  });

  it("remembers the requested watch list for resubscription", () => {
    const { session } = harness();
    session.subscribe(["A.Main.X", "B.Main.Y"]).catch(() => {});
    expect(session.watched).toEqual(["A.Main.X", "B.Main.Y"]);
  });
});
