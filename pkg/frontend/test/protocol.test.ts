import { describe, expect, it } from "vitest";

import { ProtocolClient, ProtocolError } from "../src/protocol.js";
import { MockServer } from "./mock.js";

const BASE = "http://mock.test";

function client(): ProtocolClient {
  return new ProtocolClient(BASE, new MockServer().fetch);
}

describe("ProtocolClient", () => {
  it("fetches the initial state", async () => {
    const state = await client().state();
    expect(state.depth).toBe(0);
    expect(state.ended).toBe(false);
    expect(state.trace).toEqual([]);
  });

  it("lists enabled events", async () => {
    const { events } = await client().events();
    expect(events).toEqual(["getSequencerCall()"]);
  });

  it("steps and extends the trace", async () => {
    const c = client();
    const state = await c.step(0);
    expect(state.depth).toBe(1);
    expect(state.trace).toEqual(["getSequencerCall()"]);
  });

  it("backtracks and resets", async () => {
    const c = client();
    await c.step(0);
    expect((await c.backtrack()).depth).toBe(0);
    await c.step(0);
    expect((await c.reset()).depth).toBe(0);
  });

  it("replays a full trace", async () => {
    const state = await client().trace(["getSequencerCall()", "end_of_program()"]);
    expect(state.ended).toBe(true);
    expect(state.depth).toBe(2);
  });

  it("raises ProtocolError with the server message on 422", async () => {
    await expect(client().step(9)).rejects.toThrowError(ProtocolError);
    await expect(client().step(9)).rejects.toThrowError(/no enabled transition 9/);
  });

  it("raises ProtocolError on unknown endpoints", async () => {
    const c = new ProtocolClient(BASE, new MockServer().fetch);
    // @ts-expect-error exercising the private request path via a bad method
    await expect(c.request("/nope")).rejects.toThrowError(/unknown endpoint/);
  });
});
