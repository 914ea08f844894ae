// Plain-DOM view over the Animator model.  Renders the enabled events as
// clickable buttons, the trace taken so far, and the monitor panel from
// the server's state summary; offers backtrack/reset and a paste box for
// replaying checker counterexamples.

import { Animator, Snapshot } from "./model.js";
import { MonitorSummary, ProtocolClient } from "./protocol.js";

const STATUS_LABEL: Record<string, string> = {
  running: "running",
  ended: "terminated (end_of_program)",
  deadlock: "DEADLOCK",
  divergent: "DIVERGENT",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderEvents(animator: Animator, snap: Snapshot): HTMLElement {
  const box = el("section", "panel events");
  box.appendChild(el("h2", undefined, "Enabled events"));
  if (snap.events.length === 0) {
    box.appendChild(el("p", "empty", "none"));
    return box;
  }
  const list = el("ul");
  snap.events.forEach((label, index) => {
    const item = el("li");
    const button = el("button", "event", label);
    button.addEventListener("click", () => void animator.step(index));
    item.appendChild(button);
    list.appendChild(item);
  });
  box.appendChild(list);
  return box;
}

function renderTrace(animator: Animator, snap: Snapshot): HTMLElement {
  const box = el("section", "panel trace");
  box.appendChild(el("h2", undefined, `Trace (${snap.state.depth} steps)`));
  const controls = el("div", "controls");
  const back = el("button", undefined, "⟲ backtrack");
  back.disabled = snap.state.depth === 0;
  back.addEventListener("click", () => void animator.backtrack());
  const reset = el("button", undefined, "reset");
  reset.addEventListener("click", () => void animator.reset());
  controls.append(back, reset);
  box.appendChild(controls);
  const list = el("ol");
  for (const label of snap.state.trace) {
    list.appendChild(el("li", label === "tau" ? "tau" : undefined, label));
  }
  box.appendChild(list);
  return box;
}

function renderMonitor(m: MonitorSummary): HTMLElement {
  const card = el("div", "monitor");
  card.appendChild(el("h3", undefined, m.object));
  card.appendChild(
    el("p", undefined,
       m.holder === null ? "unlocked" : `held by ${m.holder} (depth ${m.depth})`),
  );
  card.appendChild(el("p", undefined, `entry: ${JSON.stringify(m.entry_queue)}`));
  card.appendChild(el("p", undefined, `waiting: ${JSON.stringify(m.wait_set)}`));
  return card;
}

function renderSummary(snap: Snapshot): HTMLElement {
  const box = el("section", "panel summary");
  box.appendChild(el("h2", undefined, "Monitors"));
  const monitors = snap.state.summary.monitors ?? [];
  if (monitors.length === 0) {
    box.appendChild(el("p", "empty", "no monitors in this program"));
  }
  for (const m of monitors) box.appendChild(renderMonitor(m));
  return box;
}

function renderTraceLoader(animator: Animator): HTMLElement {
  const box = el("section", "panel loader");
  box.appendChild(el("h2", undefined, "Replay a counterexample"));
  const input = el("textarea");
  input.placeholder = 'JSON array or one event per line, e.g.\n["getSequencerCall()", ...]';
  const load = el("button", undefined, "replay");
  load.addEventListener("click", () => void animator.loadTrace(input.value));
  box.append(input, load);
  return box;
}

export function render(root: HTMLElement, animator: Animator, snap: Snapshot): void {
  root.textContent = "";
  const header = el("header");
  header.appendChild(el("h1", undefined, "scjcheck animator"));
  header.appendChild(el("span", `status ${snap.status}`, STATUS_LABEL[snap.status]));
  if (snap.error !== null) {
    header.appendChild(el("span", "error", snap.error));
  }
  root.appendChild(header);
  const main = el("main");
  main.append(
    renderEvents(animator, snap),
    renderTrace(animator, snap),
    renderSummary(snap),
    renderTraceLoader(animator),
  );
  root.appendChild(main);
}

export function mount(root: HTMLElement, base: string): Animator {
  const animator = new Animator(new ProtocolClient(base));
  animator.onChange((snap) => render(root, animator, snap));
  void animator.connect().catch((e) => {
    root.textContent = `cannot reach ${base}: ${String(e)} — start one with: scjcheck serve <program>`;
  });
  return animator;
}
