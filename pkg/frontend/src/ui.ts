/**
 * DOM layer of the monitor. Renders the SessionView and translates user
 * gestures into Session commands; every displayed value comes from a server
 * payload, never from client-side computation.
 */

import { ArtifactListing, Scalar } from "./protocol.js";
import { Session, VariableRow } from "./session.js";

export class MonitorUi {
  private banner: HTMLElement;
  private modeChip: HTMLElement;
  private cycleEl: HTMLElement;
  private toastsEl: HTMLElement;
  private tableBody: HTMLElement;
  private watchInput: HTMLInputElement;
  private listingsEl: HTMLElement;
  private buttons: Record<string, HTMLButtonElement>;
  private listingsBuilt = false;

  constructor(private readonly root: HTMLElement, private readonly session: Session) {
    root.innerHTML = `
      <div id="banner" class="banner" hidden>connection lost - reconnecting...</div>
      <header>
        <h1>maspc monitor</h1>
        <span id="mode" class="chip">paused</span>
        <span id="cycle" class="cycle">cycle 0</span>
        <span class="controls">
          <button id="btn-run">Run</button>
          <button id="btn-pause">Pause</button>
          <button id="btn-step-cycle">Step cycle</button>
          <button id="btn-step-stmt">Step stmt</button>
        </span>
      </header>
      <div id="toasts" class="toasts"></div>
      <main>
        <section class="watch">
          <h2>Variables</h2>
          <table class="vars">
            <thead><tr><th>name</th><th>type</th><th>value</th><th></th></tr></thead>
            <tbody id="var-rows"></tbody>
          </table>
          <form id="watch-form">
            <input id="watch-name" placeholder="Node.Main.Variable" spellcheck="false">
            <button type="submit">Watch</button>
          </form>
        </section>
        <section class="code">
          <h2>Generated code</h2>
          <div id="listings"></div>
        </section>
      </main>
    `;
    this.banner = this.el("#banner");
    this.modeChip = this.el("#mode");
    this.cycleEl = this.el("#cycle");
    this.toastsEl = this.el("#toasts");
    this.tableBody = this.el("#var-rows");
    this.watchInput = this.el<HTMLInputElement>("#watch-name");
    this.listingsEl = this.el("#listings");
    this.buttons = {
      run: this.el<HTMLButtonElement>("#btn-run"),
      pause: this.el<HTMLButtonElement>("#btn-pause"),
      stepCycle: this.el<HTMLButtonElement>("#btn-step-cycle"),
      stepStatement: this.el<HTMLButtonElement>("#btn-step-stmt"),
    };
    this.wire();
    this.render();
  }

  private el<T extends HTMLElement = HTMLElement>(selector: string): T {
    return this.root.querySelector(selector) as T;
  }

  private wire(): void {
    const swallow = (p: Promise<unknown>) => p.catch(() => {});
    this.buttons.run!.onclick = () => swallow(this.session.run(20));
    this.buttons.pause!.onclick = () => swallow(this.session.pause());
    this.buttons.stepCycle!.onclick = () => swallow(this.session.stepCycle());
    this.buttons.stepStatement!.onclick = () => swallow(this.session.stepStatement());
    this.el<HTMLFormElement>("#watch-form").onsubmit = (ev) => {
      ev.preventDefault();
      const name = this.watchInput.value.trim();
      if (!name) return;
      this.watchInput.value = "";
      swallow(this.session.subscribe([...this.session.watched, name]));
    };
  }

  /** Redraw everything that can change; called on every session change. */
  render(): void {
    const view = this.session.view;
    this.banner.hidden = view.connection === "connected";
    this.modeChip.textContent = view.fault ? "faulted" : view.mode;
    this.modeChip.className = `chip ${view.fault ? "faulted" : view.mode}`;
    this.cycleEl.textContent = `cycle ${view.cycleCounter}`;

    const stepping = view.mode === "paused" && view.fault === null;
    this.buttons.run!.disabled = !stepping;
    this.buttons.stepCycle!.disabled = !stepping;
    this.buttons.stepStatement!.disabled = !stepping;
    this.buttons.pause!.disabled = view.mode !== "running";

    this.renderToasts();
    this.renderTable();
    if (!this.listingsBuilt && view.nodes.length > 0) {
      this.buildListings();
      this.listingsBuilt = true;
    }
    this.updateListingMarks();
  }

  private renderToasts(): void {
    this.toastsEl.replaceChildren(
      ...this.session.view.toasts.map((toast) => {
        const div = document.createElement("div");
        div.className = "toast";
        div.textContent = `${toast.code}: ${toast.message}`;
        return div;
      }),
    );
  }

  private renderTable(): void {
    const rows = [...this.session.view.rows.values()];
    this.tableBody.replaceChildren(...rows.map((row) => this.renderRow(row)));
  }

  private renderRow(row: VariableRow): HTMLTableRowElement {
    const tr = document.createElement("tr");
    if (row.forced) tr.className = "forced";

    const name = document.createElement("td");
    name.textContent = row.name;
    const type = document.createElement("td");
    type.textContent = row.type;
    const value = document.createElement("td");
    value.className = "value";
    value.textContent = String(row.value);
    if (row.forced) {
      const badge = document.createElement("span");
      badge.className = "badge";
      badge.textContent = "forced";
      value.append(" ", badge);
    }

    const actions = document.createElement("td");
    const forceBtn = document.createElement("button");
    forceBtn.textContent = "force";
    forceBtn.onclick = () => this.promptForce(row);
    actions.append(forceBtn);
    if (row.forced) {
      const unforceBtn = document.createElement("button");
      unforceBtn.textContent = "unforce";
      unforceBtn.onclick = () => this.session.unforce(row.name).catch(() => {});
      actions.append(" ", unforceBtn);
    }
    const dropBtn = document.createElement("button");
    dropBtn.textContent = "x";
    dropBtn.title = "remove from watch list";
    dropBtn.onclick = () => {
      const kept = this.session.watched.filter((n) => n !== row.name);
      this.session.subscribe(kept).catch(() => {});
    };
    actions.append(" ", dropBtn);

    tr.append(name, type, value, actions);
    return tr;
  }

  private promptForce(row: VariableRow): void {
    const text = window.prompt(`force ${row.name} (${row.type}) to:`, String(row.value));
    if (text === null) return;
    const value = parseScalar(text);
    if (value === null) {
      this.session.notify("client", `not a scalar: '${text}'`);
      return;
    }
    this.session.force(row.name, value).catch(() => {});
  }

  // -- code listings ----------------------------------------------------------

  private buildListings(): void {
    this.listingsEl.replaceChildren();
    for (const node of this.session.view.nodes) {
      const h3 = document.createElement("h3");
      h3.textContent = node.name;
      this.listingsEl.append(h3);
      for (const artifact of node.artifacts) {
        this.listingsEl.append(this.buildListing(node.name, artifact));
      }
    }
  }

  private buildListing(node: string, artifact: ArtifactListing): HTMLElement {
    const details = document.createElement("details");
    details.open = artifact.kind === "program";
    const summary = document.createElement("summary");
    summary.textContent = `${artifact.name} (${artifact.kind})`;
    details.append(summary);

    const byLine = new Map<number, number>();
    for (const stmt of artifact.statements) byLine.set(stmt.line, stmt.index);

    const pre = document.createElement("pre");
    pre.className = "listing";
    artifact.text.split("\n").forEach((text, i) => {
      const line = i + 1;
      const div = document.createElement("div");
      div.className = "line";
      div.dataset.node = node;
      div.dataset.artifact = artifact.name;

      const gutter = document.createElement("span");
      gutter.className = "gutter";
      const stmtIndex = byLine.get(line);
      if (artifact.breakable && stmtIndex !== undefined) {
        div.dataset.stmt = String(stmtIndex);
        gutter.classList.add("breakable");
        gutter.title = `toggle breakpoint on statement ${stmtIndex}`;
        gutter.onclick = () => this.toggleBreakpoint(node, artifact.name, stmtIndex);
      }
      const num = document.createElement("span");
      num.className = "lineno";
      num.textContent = String(line);
      const code = document.createElement("span");
      code.textContent = text;

      div.append(gutter, num, code);
      pre.append(div);
    });
    details.append(pre);
    return details;
  }

  private toggleBreakpoint(node: string, artifact: string, index: number): void {
    const toggle = this.session.hasBreakpoint(node, artifact, index)
      ? this.session.clearBreakpoint(artifact, index, node)
      : this.session.setBreakpoint(artifact, index, node);
    toggle.catch(() => {});
  }

  /** Refresh breakpoint dots and the paused-line highlight. */
  private updateListingMarks(): void {
    const location = this.session.view.location;
    for (const div of this.listingsEl.querySelectorAll<HTMLElement>(".line")) {
      const { node, artifact, stmt } = div.dataset;
      const index = stmt === undefined ? null : Number(stmt);
      const hasBp = index !== null
        && this.session.hasBreakpoint(node!, artifact!, index);
      div.querySelector(".gutter")!.classList.toggle("bp", hasBp);
      const isCurrent = location !== null
        && index !== null
        && location.node === node
        && location.artifact.toLowerCase() === artifact!.toLowerCase()
        && location.statementIndex === index;
      div.classList.toggle("current", isCurrent);
    }
  }
}

export function parseScalar(text: string): Scalar | null {
  const trimmed = text.trim();
  if (/^true$/i.test(trimmed)) return true;
  if (/^false$/i.test(trimmed)) return false;
  if (trimmed === "") return null;
  const num = Number(trimmed);
  return Number.isFinite(num) ? num : null;
}
