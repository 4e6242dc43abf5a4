import { describe, expect, it } from "vitest";

import {
  CommandMsg,
  FrameDecoder,
  GESTURE_CLASS_NAMES,
  ProtocolError,
  encodeFrame,
  parseServerMessage,
  validateCommand,
} from "../src/protocol.js";

function cmd(name: string, args: Record<string, unknown>): CommandMsg {
  return { type: "command", id: 1, name: name as CommandMsg["name"], args };
}

describe("validateCommand", () => {
  it("accepts every documented command", () => {
    validateCommand(cmd("inject_gesture", { class_name: "swipe_right" }));
    validateCommand(cmd("play_gesture", { class_name: "s" }));
    validateCommand(cmd("set_proximity", { distance: 0.8 }));
    validateCommand(cmd("estop", {}));
    validateCommand(cmd("release_estop", {}));
    validateCommand(cmd("load_preset", { preset: "test5" }));
    validateCommand(cmd("set_speed_override", { fraction: 0.5 }));
  });

  it("rejects unknown commands, gestures, and stray args", () => {
    expect(() => validateCommand(cmd("self_destruct", {}))).toThrow(ProtocolError);
    expect(() => validateCommand(cmd("inject_gesture", { class_name: "wave" }))).toThrow();
    expect(() => validateCommand(cmd("estop", { force: 1 }))).toThrow();
    expect(() => validateCommand(cmd("set_proximity", {}))).toThrow();
    expect(() => validateCommand(cmd("set_proximity", { distance: "close" }))).toThrow();
  });

  it("knows all nine gesture classes", () => {
    expect(GESTURE_CLASS_NAMES).toHaveLength(9);
    for (const name of GESTURE_CLASS_NAMES) {
      validateCommand(cmd("play_gesture", { class_name: name }));
    }
  });
});

describe("parseServerMessage", () => {
  it("accepts well-formed telemetry", () => {
    const msg = parseServerMessage({
      type: "telemetry", stream: "gesture_recognition", seq: 3, ts: 1.2,
      data: { class_name: "up", confidence: 0.93 },
    });
    expect(msg).not.toBeNull();
    expect(msg!.type).toBe("telemetry");
  });

  it("returns null for malformed input instead of throwing", () => {
    expect(parseServerMessage(null)).toBeNull();
    expect(parseServerMessage({ type: "telemetry", stream: "nope", seq: 0, ts: 0, data: {} })).toBeNull();
    expect(parseServerMessage({
      type: "telemetry", stream: "robot_state", seq: 0, ts: 0,
      data: { sim_time: 1, guide_pos: 0.4, joints: [1, 2, 3], speed_scale: 1, estopped: false },
    })).toBeNull(); // joints must have 6 entries
    expect(parseServerMessage({
      type: "telemetry", stream: "point_cloud", seq: 0, ts: 0,
      data: { frame_index: 0, detections: [[1, 2]] },
    })).toBeNull(); // detections rows must have 5 entries
  });
});

describe("framing", () => {
  it("round-trips through the decoder byte by byte", () => {
    const messages = [
      { type: "ack", id: 1, ok: true, error: null },
      { type: "telemetry", stream: "metrics", seq: 0, ts: 0.4, data: { latency_ms: 3, fps: 25 } },
    ];
    const blob = messages.flatMap((m) => [...encodeFrame(m)]);
    const decoder = new FrameDecoder();
    const got: unknown[] = [];
    for (const byte of blob) {
      got.push(...decoder.feed(new Uint8Array([byte])));
    }
    expect(got).toEqual(messages);
  });

  it("rejects garbage prefixes", () => {
    const decoder = new FrameDecoder();
    expect(() => decoder.feed(new TextEncoder().encode("abc\n{}"))).toThrow(ProtocolError);
  });
});
