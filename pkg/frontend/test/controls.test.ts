// @vitest-environment jsdom
import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { CommandEmitter, HOLD_REPEAT_MS, bindControls } from "../src/controls.js";
import { initialModel } from "../src/model.js";
import { CommandMsg, validateCommand } from "../src/protocol.js";
import { renderViews } from "../src/render.js";

function setup(options: Parameters<typeof bindControls>[2] = {}) {
  const sent: CommandMsg[] = [];
  const emitter = new CommandEmitter((msg) => sent.push(msg));
  const tree = renderViews(initialModel(), document);
  document.body.replaceChildren(tree);
  const bound = bindControls(tree, emitter, options);
  return { sent, emitter, tree, bound };
}

describe("estop control path", () => {
  it("emits exactly one command synchronously on pointerdown", () => {
    const { sent, tree } = setup();
    const button = tree.querySelector("[data-command='estop']")!;
    button.dispatchEvent(new Event("pointerdown"));
    // Synchronous: the command is on the wire before this line runs.
    expect(sent).toHaveLength(1);
    expect(sent[0]!.name).toBe("estop");
  });

  it("does not wait for pointerup or click", () => {
    const { sent, tree } = setup();
    const button = tree.querySelector("[data-command='estop']")!;
    button.dispatchEvent(new Event("pointerdown"));
    expect(sent.map((m) => m.name)).toEqual(["estop"]);
    button.dispatchEvent(new Event("pointerup"));
    button.dispatchEvent(new Event("click"));
    expect(sent).toHaveLength(1);
  });
});

describe("hold-to-move guide buttons", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("re-triggers every 100 ms within +/- 20 ms while held", () => {
    const { sent, tree } = setup();
    const button = tree.querySelector("[data-guide='swipe_right']")!;
    button.dispatchEvent(new Event("pointerdown"));
    expect(sent).toHaveLength(1); // immediate first trigger

    const times: number[] = [];
    const start = Date.now();
    // Observe triggers over one simulated second at 10 ms resolution.
    for (let t = 10; t <= 1000; t += 10) {
      const before = sent.length;
      vi.advanceTimersByTime(10);
      if (sent.length > before) times.push(Date.now() - start);
    }
    expect(sent.length).toBe(11); // 1 immediate + 10 repeats in 1 s
    const gaps = times.map((t, i) => (i === 0 ? t : t - times[i - 1]!));
    for (const gap of gaps) {
      expect(gap).toBeGreaterThanOrEqual(HOLD_REPEAT_MS - 20);
      expect(gap).toBeLessThanOrEqual(HOLD_REPEAT_MS + 20);
    }
    for (const msg of sent) {
      expect(msg.name).toBe("inject_gesture");
      expect(msg.args.class_name).toBe("swipe_right");
    }
  });

  it("stops repeating on pointerup", () => {
    const { sent, tree } = setup();
    const button = tree.querySelector("[data-guide='swipe_left']")!;
    button.dispatchEvent(new Event("pointerdown"));
    vi.advanceTimersByTime(350);
    const during = sent.length;
    expect(during).toBe(4);
    button.dispatchEvent(new Event("pointerup"));
    vi.advanceTimersByTime(1000);
    expect(sent).toHaveLength(during);
  });
});

describe("other controls", () => {
  it("gesture buttons play the full chain", () => {
    const { sent, tree } = setup();
    const button = tree.querySelector("[data-gesture='swipe_ccw']")!;
    button.dispatchEvent(new Event("click"));
    expect(sent).toHaveLength(1);
    expect(sent[0]!.name).toBe("play_gesture");
    expect(sent[0]!.args.class_name).toBe("swipe_ccw");
  });

  it("proximity slider issues set_proximity", () => {
    const { sent, tree } = setup();
    const slider = tree.querySelector<HTMLInputElement>(".proximity-slider")!;
    slider.value = "0.45";
    slider.dispatchEvent(new Event("input"));
    expect(sent[0]!.name).toBe("set_proximity");
    expect(sent[0]!.args.distance).toBeCloseTo(0.45);
  });

  it("preset switch while running asks for confirmation", () => {
    const answers: boolean[] = [false, true];
    const asked: string[] = [];
    const { sent, tree } = setup({
      isTreeRunning: () => true,
      confirm: (q) => {
        asked.push(q);
        return answers.shift() ?? false;
      },
    });
    const select = tree.querySelector<HTMLSelectElement>(".preset-select")!;
    select.value = "test5";
    select.dispatchEvent(new Event("change"));
    expect(sent).toHaveLength(0); // declined
    select.dispatchEvent(new Event("change"));
    expect(sent).toHaveLength(1); // accepted
    expect(sent[0]!.name).toBe("load_preset");
    expect(asked).toHaveLength(2);
  });

  it("every emitted command validates against the protocol schema", () => {
    const { sent, tree } = setup();
    tree.querySelector("[data-command='estop']")!.dispatchEvent(new Event("pointerdown"));
    tree.querySelector("[data-command='release_estop']")!.dispatchEvent(new Event("click"));
    for (const button of tree.querySelectorAll("[data-gesture]")) {
      button.dispatchEvent(new Event("click"));
    }
    const slider = tree.querySelector<HTMLInputElement>(".proximity-slider")!;
    slider.value = "1.2";
    slider.dispatchEvent(new Event("input"));
    expect(sent.length).toBeGreaterThan(10);
    for (const msg of sent) {
      expect(() => validateCommand(msg)).not.toThrow();
    }
    const ids = sent.map((m) => m.id);
    expect(new Set(ids).size).toBe(ids.length);
  });
});
