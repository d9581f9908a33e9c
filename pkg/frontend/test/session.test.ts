import { describe, expect, it } from "vitest";

import { parseFrame } from "../src/types.js";
import { Session, TRAIL_SECONDS } from "../src/session.js";

function point(t: number, valence: number, arousal: number, word = "pleased"): string {
  return JSON.stringify({ kind: "point", t, valence, arousal, word });
}

describe("parseFrame", () => {
  it("round trips a point frame", () => {
    const frame = parseFrame(point(5, 0.25, -0.5, "content"));
    expect(frame).toEqual({ kind: "point", t: 5, valence: 0.25, arousal: -0.5, word: "content" });
  });

  it("parses status and end frames", () => {
    expect(parseFrame('{"kind": "status", "state": "idle"}')).toEqual({
      kind: "status",
      state: "idle",
    });
    expect(parseFrame('{"kind": "end"}')).toEqual({ kind: "end" });
  });

  it("rejects garbage", () => {
    expect(parseFrame("not json at all")).toBeNull();
    expect(parseFrame("[1, 2, 3]")).toBeNull();
    expect(parseFrame("42")).toBeNull();
    expect(parseFrame('{"kind": "mystery"}')).toBeNull();
    expect(parseFrame("{}")).toBeNull();
  });

  it("rejects point frames with missing or broken fields", () => {
    expect(parseFrame('{"kind": "point", "t": 1, "valence": 0.1}')).toBeNull();
    expect(parseFrame('{"kind": "point", "t": "soon", "valence": 0, "arousal": 0, "word": "pleased"}')).toBeNull();
    expect(parseFrame('{"kind": "point", "t": 1, "valence": null, "arousal": 0, "word": "pleased"}')).toBeNull();
    expect(parseFrame('{"kind": "point", "t": 1, "valence": 0, "arousal": 0, "word": 7}')).toBeNull();
    expect(parseFrame('{"kind": "status"}')).toBeNull();
  });

  it("rejects non-finite coordinates", () => {
    expect(parseFrame('{"kind": "point", "t": 1, "valence": 1e999, "arousal": 0, "word": "x"}')).toBeNull();
  });
});

describe("Session", () => {
  it("starts out connecting and empty", () => {
    const state = new Session().getState();
    expect(state.phase).toBe("connecting");
    expect(state.trail).toEqual([]);
    expect(state.errors).toBe(0);
    expect(state.serverState).toBeNull();
  });

  it("goes live on the first accepted point", () => {
    const session = new Session();
    expect(session.handleMessage(point(5, 0.3, -0.2, "content"))).toBe(true);
    const state = session.getState();
    expect(state.phase).toBe("live");
    expect(state.trail).toEqual([{ t: 5, valence: 0.3, arousal: -0.2, word: "content" }]);
  });

  it("counts malformed frames without touching the trail", () => {
    const session = new Session();
    session.handleMessage(point(1, 0.1, 0.1));
    session.handleMessage("{broken");
    session.handleMessage('{"kind": "nope"}');
    const state = session.getState();
    expect(state.errors).toBe(2);
    expect(state.trail).toHaveLength(1);
    expect(state.phase).toBe("live");
  });

  it("drops points outside the unit square and counts them", () => {
    const session = new Session();
    session.handleMessage(point(1, 1.0001, 0));
    session.handleMessage(point(2, 0, -1.5));
    expect(session.getState().errors).toBe(2);
    expect(session.getState().trail).toEqual([]);
    // the boundary itself is inside
    session.handleMessage(point(3, 1, -1));
    expect(session.getState().trail).toHaveLength(1);
    expect(session.getState().errors).toBe(2);
  });

  it("tracks the server state from status frames", () => {
    const session = new Session();
    session.handleMessage('{"kind": "status", "state": "decoding"}');
    expect(session.getState().serverState).toBe("decoding");
  });

  it("freezes the trail once the stream ends", () => {
    const session = new Session();
    session.handleMessage(point(1, 0.5, 0.5));
    session.handleMessage('{"kind": "end"}');
    expect(session.getState().phase).toBe("ended");
    expect(session.handleMessage(point(2, -0.5, -0.5))).toBe(false);
    const state = session.getState();
    expect(state.trail).toHaveLength(1);
    expect(state.trail[0].t).toBe(1);
    expect(state.errors).toBe(0);
  });

  it("trims the trail to the configured window", () => {
    const session = new Session();
    for (const t of [0, 10, TRAIL_SECONDS + 5]) {
      session.handleMessage(point(t, 0, 0));
    }
    const ts = session.getState().trail.map((p) => p.t);
    expect(ts).toEqual([10, TRAIL_SECONDS + 5]);
  });

  it("always keeps the newest point even after a huge time jump", () => {
    const session = new Session();
    session.handleMessage(point(0, 0.1, 0.1));
    session.handleMessage(point(1e6, 0.2, 0.2));
    const trail = session.getState().trail;
    expect(trail).toHaveLength(1);
    expect(trail[0].t).toBe(1e6);
  });

  it("reports disconnects and recovers", () => {
    const session = new Session();
    session.handleMessage(point(1, 0, 0));
    session.noteDisconnected();
    expect(session.getState().phase).toBe("disconnected");
    session.noteConnected();
    expect(session.getState().phase).toBe("live");
  });

  it("stays in connecting when reconnecting with an empty trail", () => {
    const session = new Session();
    session.noteDisconnected();
    session.noteConnected();
    expect(session.getState().phase).toBe("connecting");
  });

  it("keeps the ended phase through socket churn", () => {
    const session = new Session();
    session.handleMessage('{"kind": "end"}');
    session.noteDisconnected();
    session.noteConnected();
    expect(session.getState().phase).toBe("ended");
  });
});
