// An in-memory stand-in for `scjcheck serve`: the same six endpoints over
// the same JSON payloads, backed by a small hand-written transition system
// with one terminating branch and one deadlocking branch.

import { FetchLike, StatePayload } from "../src/protocol.js";

interface Node {
  edges: Array<[string, number]>;
  ended?: boolean;
}

// 0 --a--> 1 --b--> 2 (ended)
//      \--d--> 3 (deadlock: no edges, not ended)
export const LTS: Node[] = [
  { edges: [["getSequencerCall()", 1]] },
  { edges: [["end_of_program()", 2], ["writeCall(M,Writer,1)", 3]] },
  { edges: [], ended: true },
  { edges: [] },
];

export class MockServer {
  private path: number[] = [0];
  private trace: string[] = [];

  private get node(): Node {
    return LTS[this.path[this.path.length - 1]];
  }

  private statePayload(): StatePayload {
    return {
      summary: {
        monitors: [
          {
            object: "M",
            holder: null,
            depth: 0,
            entry_queue: [],
            wait_set: this.node.edges.length === 0 && !this.node.ended
              ? [{ level: 1, threads: ["Reader"] }]
              : [],
          },
        ],
      },
      trace: [...this.trace],
      depth: this.trace.length,
      ended: this.node.ended ?? false,
      divergent: false,
      deadlock: this.node.edges.length === 0 && !(this.node.ended ?? false),
    };
  }

  readonly fetch: FetchLike = (url, init) => {
    const path = new URL(url).pathname;
    const body = init?.body ? (JSON.parse(init.body) as Record<string, unknown>) : {};
    const ok = (payload: unknown) =>
      Promise.resolve({ status: 200, json: () => Promise.resolve(payload) });
    const fail = (status: number, error: string) =>
      Promise.resolve({ status, json: () => Promise.resolve({ error }) });

    switch (path) {
      case "/state":
        return ok(this.statePayload());
      case "/events":
        return ok({ events: this.node.edges.map(([label]) => label) });
      case "/step": {
        const index = body.index as number;
        const edge = this.node.edges[index];
        if (edge === undefined) return fail(422, `no enabled transition ${index}`);
        this.path.push(edge[1]);
        this.trace.push(edge[0]);
        return ok(this.statePayload());
      }
      case "/backtrack":
        if (this.path.length > 1) {
          this.path.pop();
          this.trace.pop();
        }
        return ok(this.statePayload());
      case "/reset":
        this.path = [0];
        this.trace = [];
        return ok(this.statePayload());
      case "/trace": {
        const labels = body.trace as string[];
        this.path = [0];
        this.trace = [];
        for (const label of labels) {
          const edge = this.node.edges.find(([l]) => l === label);
          if (edge === undefined) {
            return fail(422, `replay stuck at step ${this.trace.length}: no transition '${label}'`);
          }
          this.path.push(edge[1]);
          this.trace.push(label);
        }
        return ok(this.statePayload());
      }
      default:
        return fail(404, `unknown endpoint ${path}`);
    }
  };
}
