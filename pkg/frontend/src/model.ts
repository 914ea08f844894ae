// UI-independent animator state: the last /state payload, the current
// enabled-event list, and the operations the buttons map onto.  The view
// layer only renders snapshots of this model.

import { ProtocolClient, ProtocolError, StatePayload } from "./protocol.js";

export type Status = "running" | "ended" | "deadlock" | "divergent";

export interface Snapshot {
  state: StatePayload;
  events: string[];
  status: Status;
  error: string | null;
}

export function statusOf(state: StatePayload, events: string[]): Status {
  if (state.ended) return "ended";
  if (state.divergent) return "divergent";
  if (state.deadlock || events.length === 0) return "deadlock";
  return "running";
}

/** Parse a pasted counterexample: a JSON array, or one label per line. */
export function parseTrace(text: string): string[] {
  const trimmed = text.trim();
  if (trimmed === "") return [];
  if (trimmed.startsWith("[")) {
    const parsed = JSON.parse(trimmed) as unknown;
    if (!Array.isArray(parsed) || parsed.some((x) => typeof x !== "string")) {
      throw new Error("trace must be an array of event labels");
    }
    return parsed as string[];
  }
  return trimmed
    .split("\n")
    .map((line) => line.trim())
    .filter((line) => line !== "");
}

export class Animator {
  private readonly client: ProtocolClient;
  private listeners: Array<(snap: Snapshot) => void> = [];
  private state: StatePayload | null = null;
  private events: string[] = [];
  private error: string | null = null;

  constructor(client: ProtocolClient) {
    this.client = client;
  }

  onChange(fn: (snap: Snapshot) => void): void {
    this.listeners.push(fn);
  }

  snapshot(): Snapshot {
    if (this.state === null) throw new Error("animator not connected yet");
    return {
      state: this.state,
      events: [...this.events],
      status: statusOf(this.state, this.events),
      error: this.error,
    };
  }

  private async sync(state: StatePayload): Promise<void> {
    this.state = state;
    this.events = state.ended || state.divergent
      ? []
      : (await this.client.events()).events;
    for (const fn of this.listeners) fn(this.snapshot());
  }

  private async run(op: () => Promise<StatePayload>): Promise<void> {
    try {
      this.error = null;
      await this.sync(await op());
    } catch (e) {
      this.error = e instanceof ProtocolError ? e.message : String(e);
      if (this.state !== null) {
        for (const fn of this.listeners) fn(this.snapshot());
      } else {
        throw e;
      }
    }
  }

  connect(): Promise<void> {
    return this.run(() => this.client.state());
  }

  step(index: number): Promise<void> {
    return this.run(() => this.client.step(index));
  }

  backtrack(): Promise<void> {
    return this.run(() => this.client.backtrack());
  }

  reset(): Promise<void> {
    return this.run(() => this.client.reset());
  }

  loadTrace(text: string): Promise<void> {
    return this.run(() => this.client.trace(parseTrace(text)));
  }
}
