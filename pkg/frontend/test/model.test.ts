import { describe, expect, it } from "vitest";

import {
  EVENT_FEED_CAPACITY,
  applyConnectionState,
  applyServerMessage,
  initialModel,
} from "../src/model.js";

function telemetry(stream: string, seq: number, data: Record<string, unknown>) {
  return { type: "telemetry", stream, seq, ts: seq * 0.04, data };
}

const ROBOT = {
  sim_time: 1.0, guide_pos: 0.5, joints: [0, -1.57, 1.57, -1.57, -1.57, 0],
  gripper: 1.0, speed_scale: 1.0, estopped: false,
};

describe("applyServerMessage", () => {
  it("keeps only the latest snapshot per stream", () => {
    let model = initialModel();
    model = applyServerMessage(model, telemetry("robot_state", 5, { ...ROBOT, guide_pos: 0.5 }));
    model = applyServerMessage(model, telemetry("robot_state", 4, { ...ROBOT, guide_pos: 0.1 }));
    expect(model.robotState!.guide_pos).toBe(0.5);
    model = applyServerMessage(model, telemetry("robot_state", 6, { ...ROBOT, guide_pos: 0.9 }));
    expect(model.robotState!.guide_pos).toBe(0.9);
  });

  it("orders the gesture feed by sequence id and caps it", () => {
    let model = initialModel();
    for (let i = 0; i < EVENT_FEED_CAPACITY + 20; i++) {
      model = applyServerMessage(model, telemetry("gesture_recognition", i, {
        class_name: "up", confidence: 0.9,
      }));
    }
    expect(model.events).toHaveLength(EVENT_FEED_CAPACITY);
    const seqs = model.events.map((e) => e.seq);
    expect(seqs).toEqual([...seqs].sort((a, b) => a - b));
    expect(seqs[0]).toBe(20);
  });

  it("counts malformed messages without corrupting state", () => {
    let model = initialModel();
    model = applyServerMessage(model, telemetry("robot_state", 1, ROBOT));
    const before = model.robotState;
    model = applyServerMessage(model, { garbage: true });
    model = applyServerMessage(model, telemetry("robot_state", 0, { bad: "shape" }));
    expect(model.malformedCount).toBe(2);
    expect(model.robotState).toBe(before);
  });

  it("welcome sets role and preset", () => {
    let model = initialModel();
    model = applyServerMessage(model, {
      type: "welcome", role: "controller", protocol: 1, preset: "test1_pick_place",
    });
    expect(model.role).toBe("controller");
    expect(model.preset).toBe("test1_pick_place");
  });
});

describe("applyConnectionState", () => {
  it("clears the role on disconnect and preserves telemetry", () => {
    let model = initialModel();
    model = applyServerMessage(model, {
      type: "welcome", role: "controller", protocol: 1, preset: "test1_pick_place",
    });
    model = applyServerMessage(model, telemetry("robot_state", 1, ROBOT));
    model = applyConnectionState(model, "connected");
    model = applyConnectionState(model, "disconnected");
    expect(model.connection).toBe("disconnected");
    expect(model.role).toBeNull();
    expect(model.robotState).not.toBeNull();
  });
});
