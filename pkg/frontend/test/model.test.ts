import { describe, expect, it } from "vitest";

import { Animator, parseTrace, statusOf } from "../src/model.js";
import { ProtocolClient, StatePayload } from "../src/protocol.js";
import { MockServer } from "./mock.js";

function animator(): Animator {
  return new Animator(new ProtocolClient("http://mock.test", new MockServer().fetch));
}

function state(partial: Partial<StatePayload>): StatePayload {
  return {
    summary: {},
    trace: [],
    depth: 0,
    ended: false,
    divergent: false,
    deadlock: false,
    ...partial,
  };
}

describe("statusOf", () => {
  it("maps payload flags to a single status", () => {
    expect(statusOf(state({}), ["a()"])).toBe("running");
    expect(statusOf(state({ ended: true }), [])).toBe("ended");
    expect(statusOf(state({ divergent: true }), [])).toBe("divergent");
    expect(statusOf(state({ deadlock: true }), [])).toBe("deadlock");
  });
});

describe("parseTrace", () => {
  it("accepts a JSON array", () => {
    expect(parseTrace('["a()", "b(1)"]')).toEqual(["a()", "b(1)"]);
  });

  it("accepts one label per line", () => {
    expect(parseTrace("a()\n  b(1)  \n\n")).toEqual(["a()", "b(1)"]);
  });

  it("rejects non-string arrays", () => {
    expect(() => parseTrace("[1, 2]")).toThrowError(/array of event labels/);
  });
});

describe("Animator", () => {
  it("connects and exposes the enabled events", async () => {
    const a = animator();
    await a.connect();
    const snap = a.snapshot();
    expect(snap.status).toBe("running");
    expect(snap.events).toEqual(["getSequencerCall()"]);
  });

  it("clicks through to termination", async () => {
    const a = animator();
    await a.connect();
    // The click-through loop an end user performs: always take the first
    // enabled event until the program ends.
    for (let i = 0; i < 10 && a.snapshot().status === "running"; i++) {
      await a.step(0);
    }
    const snap = a.snapshot();
    expect(snap.status).toBe("ended");
    expect(snap.state.trace).toEqual(["getSequencerCall()", "end_of_program()"]);
    expect(snap.events).toEqual([]);
  });

  it("reaches and reports a deadlock", async () => {
    const a = animator();
    await a.connect();
    await a.step(0);
    await a.step(1); // the writeCall branch leads into the deadlock
    const snap = a.snapshot();
    expect(snap.status).toBe("deadlock");
    expect(JSON.stringify(snap.state.summary.monitors)).toContain("Reader");
  });

  it("replays a pasted deadlock counterexample", async () => {
    const a = animator();
    await a.connect();
    await a.loadTrace('["getSequencerCall()", "writeCall(M,Writer,1)"]');
    const snap = a.snapshot();
    expect(snap.status).toBe("deadlock");
    expect(snap.state.depth).toBe(2);
    expect(snap.error).toBeNull();
  });

  it("backtracks out of the deadlock and resets", async () => {
    const a = animator();
    await a.connect();
    await a.loadTrace("getSequencerCall()\nwriteCall(M,Writer,1)");
    await a.backtrack();
    expect(a.snapshot().status).toBe("running");
    await a.reset();
    expect(a.snapshot().state.depth).toBe(0);
  });

  it("keeps the last good state and surfaces errors", async () => {
    const a = animator();
    await a.connect();
    await a.step(42);
    const snap = a.snapshot();
    expect(snap.error).toMatch(/no enabled transition 42/);
    expect(snap.state.depth).toBe(0);
  });

  it("notifies listeners on every change", async () => {
    const a = animator();
    const seen: string[] = [];
    a.onChange((snap) => seen.push(snap.status));
    await a.connect();
    await a.step(0);
    await a.step(0);
    expect(seen).toEqual(["running", "running", "ended"]);
  });
});
