// Typed client for the scjcheck animation protocol.  The animator contains
// no semantics of its own: every state, event list and verdict flag shown
// in the UI comes verbatim from these six endpoints.

export interface MonitorSummary {
  object: string;
  holder: string | null;
  depth: number;
  entry_queue: unknown;
  wait_set: unknown;
  [key: string]: unknown;
}

export interface ComponentSummary {
  id: string;
  [key: string]: unknown;
}

export interface StateSummary {
  components?: ComponentSummary[];
  monitors?: MonitorSummary[];
  [key: string]: unknown;
}

export interface StatePayload {
  summary: StateSummary;
  trace: string[];
  depth: number;
  ended: boolean;
  divergent: boolean;
  deadlock: boolean;
}

export interface EventsPayload {
  events: string[];
}

export class ProtocolError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

export type FetchLike = (
  url: string,
  init?: { method?: string; body?: string; headers?: Record<string, string> },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export class ProtocolClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(base: string, fetchFn: FetchLike = fetch as unknown as FetchLike) {
    this.base = base.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  private async request<T>(path: string, payload?: unknown): Promise<T> {
    const init =
      payload === undefined
        ? undefined
        : {
            method: "POST",
            body: JSON.stringify(payload),
            headers: { "Content-Type": "application/json" },
          };
    const res = await this.fetchFn(this.base + path, init);
    const body = (await res.json()) as Record<string, unknown>;
    if (res.status !== 200) {
      throw new ProtocolError(res.status, String(body.error ?? "request failed"));
    }
    return body as T;
  }

  state(): Promise<StatePayload> {
    return this.request<StatePayload>("/state");
  }

  events(): Promise<EventsPayload> {
    return this.request<EventsPayload>("/events");
  }

  step(index: number): Promise<StatePayload> {
    return this.request<StatePayload>("/step", { index });
  }

  backtrack(): Promise<StatePayload> {
    return this.request<StatePayload>("/backtrack", {});
  }

  reset(): Promise<StatePayload> {
    return this.request<StatePayload>("/reset", {});
  }

  trace(labels: string[]): Promise<StatePayload> {
    return this.request<StatePayload>("/trace", { trace: labels });
  }
}
