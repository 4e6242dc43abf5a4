// @vitest-environment jsdom
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { applyServerMessage, initialModel, UiSessionModel } from "../src/model.js";
import { renderViews } from "../src/render.js";

const HERE = dirname(fileURLToPath(import.meta.url));

function telemetry(stream: string, seq: number, data: Record<string, unknown>) {
  return { type: "telemetry", stream, seq, ts: seq * 0.04, data };
}

const ROBOT = {
  sim_time: 2.0, guide_pos: 0.5, joints: [0, -1.57, 1.57, -1.57, -1.57, 0],
  gripper: 0.4, speed_scale: 1.0, estopped: false, guide_velocity: 0.08,
  joint_points: [[0.5, 0, 0], [0.5, 0, 0.09], [0.2, 0, 0.4], [0.1, 0.1, 0.6],
                 [0.1, 0.2, 0.6], [0.1, 0.2, 0.7], [0.15, 0.25, 0.7]],
};

describe("renderViews", () => {
  it("renders one glyph per detection", () => {
    let model = initialModel();
    const detections = [
      [120.0, 0.3, 0.4, 0.02, 0.3],
      [80.0, 0.35, -0.2, -0.05, 0.34],
      [10.0, 0.9, 0.1, 0.2, 0.88],
    ];
    model = applyServerMessage(model, telemetry("point_cloud", 1, {
      frame_index: 7, detections,
    })) as UiSessionModel;
    const tree = renderViews(model, document);
    expect(tree.querySelectorAll(".pc-glyph")).toHaveLength(detections.length);
    expect(tree.querySelector(".pc-count")!.textContent).toContain("3 detections");
  });

  it("renders 65 glyphs for a full frame", () => {
    let model = initialModel();
    const detections = Array.from({ length: 65 }, (_, i) => [65 - i, 0.3, 0.1, 0.0, 0.3]);
    model = applyServerMessage(model, telemetry("point_cloud", 1, {
      frame_index: 0, detections,
    }));
    const tree = renderViews(model, document);
    expect(tree.querySelectorAll(".pc-glyph")).toHaveLength(65);
  });

  it("shows the estop banner when speed scale is zero", () => {
    let model = initialModel();
    model = applyServerMessage(model, telemetry("robot_state", 1, {
      ...ROBOT, speed_scale: 0.0, estopped: true,
    }));
    const tree = renderViews(model, document);
    expect(tree.querySelector(".estop-banner")).not.toBeNull();
    // And absent when running normally.
    model = applyServerMessage(model, telemetry("robot_state", 2, ROBOT));
    expect(renderViews(model, document).querySelector(".estop-banner")).toBeNull();
  });

  it("renders a gesture feed row with a confidence bar", () => {
    let model = initialModel();
    model = applyServerMessage(model, telemetry("gesture_recognition", 0, {
      class_name: "swipe_ccw", confidence: 0.93,
    }));
    const tree = renderViews(model, document);
    const row = tree.querySelector(".feed-row")!;
    expect(row.querySelector(".feed-class")!.textContent).toBe("swipe_ccw");
    const fill = row.querySelector(".confidence-fill") as HTMLElement;
    expect(fill.style.width).toBe("93%");
  });

  it("renders the bt breadcrumb with a status class", () => {
    let model = initialModel();
    model = applyServerMessage(model, telemetry("bt_status", 0, {
      tree_id: "move_right", node_path: "sequence[1]/action:move_to(right)", status: "running",
    }));
    const tree = renderViews(model, document);
    const crumb = tree.querySelector(".bt-breadcrumb")!;
    expect(crumb.className).toContain("bt-running");
    expect(crumb.textContent).toContain("move_right");
  });

  it("is a pure function of the model", () => {
    let model = initialModel();
    model = applyServerMessage(model, telemetry("robot_state", 1, ROBOT));
    const a = renderViews(model, document);
    const b = renderViews(model, document);
    expect(a.isEqualNode(b)).toBe(true);
  });

  it("renders a recorded telemetry log headlessly with matching glyph counts", () => {
    const lines = readFileSync(join(HERE, "fixtures", "telemetry.jsonl"), "utf-8")
      .trim().split("\n");
    let model = initialModel();
    let lastCloud: { detections: unknown[] } | null = null;
    let sawEvent = false;
    for (const line of lines) {
      const raw = JSON.parse(line);
      model = applyServerMessage(model, raw);
      if (raw.stream === "point_cloud") lastCloud = raw.data;
      if (raw.stream === "gesture_recognition") sawEvent = true;
    }
    expect(model.malformedCount).toBe(0);
    const tree = renderViews(model, document);
    expect(lastCloud).not.toBeNull();
    expect(tree.querySelectorAll(".pc-glyph")).toHaveLength(lastCloud!.detections.length);
    expect(sawEvent).toBe(true);
    expect(tree.querySelectorAll(".feed-row").length).toBeGreaterThan(0);
    expect(tree.querySelectorAll(".arm-joint").length).toBeGreaterThan(0);
  });
});
