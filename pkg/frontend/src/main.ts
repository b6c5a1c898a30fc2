/**
 * Entry point: connect to the debug endpoint of the server that delivered
 * this page, establish the session, and default the watch list to every
 * program-level variable so the table is live immediately.
 */

import { Connection, defaultEndpoint } from "./connection.js";
import { Session } from "./session.js";
import { MonitorUi } from "./ui.js";

const DEFAULT_WATCH_LIMIT = 64;

/** Program-level scalars: Node.Main.X, skipping instance members. */
export function defaultWatchList(nodes: { variables: string[] }[], limit = DEFAULT_WATCH_LIMIT): string[] {
  const names: string[] = [];
  for (const node of nodes) {
    for (const name of node.variables) {
      if (name.split(".").length === 3) names.push(name);
    }
  }
  return names.slice(0, limit);
}

function start(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");

  const session = new Session(
    (text) => connection.send(text),
    () => ui.render(),
  );
  const connection: Connection = new Connection(defaultEndpoint(window.location), {
    onOpen: async () => {
      session.setConnection("connected");
      try {
        await session.hello();
        const watch = session.watched.length > 0
          ? session.watched
          : defaultWatchList(session.view.nodes);
        await session.subscribe(watch);
      } catch (err) {
        session.notify("client", `handshake failed: ${String(err)}`);
      }
    },
    onText: (text) => session.handleText(text),
    onDown: () => session.setConnection("disconnected"),
  });
  const ui = new MonitorUi(root, session);
  connection.start();
}

start();
