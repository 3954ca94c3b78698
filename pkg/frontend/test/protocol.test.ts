import { describe, expect, it } from "vitest";

import {
  actionMessage,
  channelUrl,
  parseStateMessage,
  recorderMessage,
  resetMessage,
} from "../src/protocol.js";
import type { ActionBody, StateMessage } from "../src/protocol.js";

function sampleState(): StateMessage {
  return {
    type: "state",
    t: 1.23,
    tcp_pos: [0.3, 0, 0.5],
    tcp_orn: [1, 0, 0, 0],
    gripper: 0.08,
    moving: true,
    clipped: false,
    limited: true,
    workspace: { lo: [0, -0.5, 0], hi: [0.8, 0.5, 0.9] },
    recording: false,
  };
}

describe("outgoing messages", () => {
  it("action envelope carries exactly the wire fields", () => {
    const body: ActionBody = {
      motion: { pos: [0.01, 0, 0], orn: [0, 0, 0, 1], grip: 1 },
      ref: "rel",
      path: "ptp",
      blocking: false,
    };
    const obj = JSON.parse(actionMessage(body));
    expect(Object.keys(obj).sort()).toEqual(["blocking", "motion", "path", "ref", "type"]);
    expect(Object.keys(obj.motion).sort()).toEqual(["grip", "orn", "pos"]);
    expect(obj.type).toBe("action");
    expect(obj.motion.pos).toEqual([0.01, 0, 0]);
    expect(obj.motion.orn).toEqual([0, 0, 0, 1]);
    expect(obj.motion.grip).toBe(1);
    expect(obj.ref).toBe("rel");
    expect(obj.path).toBe("ptp");
    expect(obj.blocking).toBe(false);
  });

  it("recorder and reset envelopes", () => {
    expect(JSON.parse(recorderMessage("start"))).toEqual({ type: "recorder", cmd: "start" });
    expect(JSON.parse(recorderMessage("discard"))).toEqual({ type: "recorder", cmd: "discard" });
    expect(JSON.parse(resetMessage())).toEqual({ type: "reset" });
  });
});

describe("incoming state messages", () => {
  it("round-trips a well-formed message verbatim", () => {
    const msg = sampleState();
    expect(parseStateMessage(JSON.stringify(msg))).toEqual(msg);
  });

  it("accepts a null workspace", () => {
    const msg = { ...sampleState(), workspace: null };
    expect(parseStateMessage(JSON.stringify(msg))).toEqual(msg);
  });

  it("drops anything malformed instead of throwing", () => {
    const good = sampleState();
    const cases: string[] = [
      "{oops",
      '"just a string"',
      "null",
      JSON.stringify({ type: "pong" }),
      JSON.stringify({ ...good, tcp_pos: [1, 2] }),
      JSON.stringify({ ...good, tcp_orn: [1, 0, 0, "w"] }),
      JSON.stringify({ ...good, t: "late" }),
      JSON.stringify({ ...good, moving: "yes" }),
      JSON.stringify({ ...good, recording: undefined }),
      JSON.stringify({ ...good, workspace: { lo: [0, 0, 0] } }),
    ];
    for (const raw of cases) expect(parseStateMessage(raw)).toBeNull();
  });
});

describe("channel url", () => {
  it("derives ws from http and keeps host and port", () => {
    expect(channelUrl("http://127.0.0.1:8765", "controller")).toBe(
      "ws://127.0.0.1:8765/ws?role=controller",
    );
    expect(channelUrl("https://robot.example", "observer")).toBe(
      "wss://robot.example/ws?role=observer",
    );
  });

  it("tolerates a trailing slash", () => {
    expect(channelUrl("http://10.0.0.2:9000/", "controller")).toBe(
      "ws://10.0.0.2:9000/ws?role=controller",
    );
  });
});
