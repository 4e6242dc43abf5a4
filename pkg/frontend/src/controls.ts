// Binds operator behavior onto a rendered dashboard tree. Every outgoing
// command passes through validateCommand before hitting the wire; the
// emergency stop is sent synchronously inside the pointerdown handler with
// no async hop in between.

import { CommandMsg, CommandName, validateCommand } from "./protocol.js";

export const HOLD_REPEAT_MS = 100;

export class CommandEmitter {
  private nextId = 1;
  readonly sent: CommandMsg[] = [];

  constructor(private readonly send: (msg: CommandMsg) => void) {}

  issue(name: CommandName, args: Record<string, unknown> = {}): CommandMsg {
    const msg: CommandMsg = { type: "command", id: this.nextId++, name, args };
    validateCommand(msg);
    this.sent.push(msg);
    this.send(msg);
    return msg;
  }
}

export interface ControlsOptions {
  /** Confirmation hook for preset switches while a tree is running. */
  confirm?: (question: string) => boolean;
  isTreeRunning?: () => boolean;
  setInterval?: typeof globalThis.setInterval;
  clearInterval?: typeof globalThis.clearInterval;
}

export interface BoundControls {
  dispose(): void;
}

/** Wires the control panel: gesture buttons play the full radar chain,
 * hold-to-move guide buttons re-inject their gesture every 100 ms while
 * pressed, the slider drives set_proximity, and estop fires on pointerdown. */
export function bindControls(
  root: ParentNode,
  emitter: CommandEmitter,
  options: ControlsOptions = {},
): BoundControls {
  const schedule = options.setInterval ?? globalThis.setInterval.bind(globalThis);
  const cancel = options.clearInterval ?? globalThis.clearInterval.bind(globalThis);
  const cleanups: Array<() => void> = [];

  const on = (node: Element, event: string, handler: (ev: Event) => void) => {
    node.addEventListener(event, handler);
    cleanups.push(() => node.removeEventListener(event, handler));
  };

  const estop = root.querySelector("[data-command='estop']");
  if (estop) {
    // pointerdown, not click: the stop must not wait for the release.
    on(estop, "pointerdown", () => {
      emitter.issue("estop");
    });
  }
  const release = root.querySelector("[data-command='release_estop']");
  if (release) {
    on(release, "click", () => emitter.issue("release_estop"));
  }

  for (const button of root.querySelectorAll("[data-gesture]")) {
    const name = button.getAttribute("data-gesture")!;
    on(button, "click", () => emitter.issue("play_gesture", { class_name: name }));
  }

  for (const button of root.querySelectorAll("[data-guide]")) {
    const name = button.getAttribute("data-guide")!;
    let timer: ReturnType<typeof setInterval> | null = null;
    const stop = () => {
      if (timer !== null) {
        cancel(timer);
        timer = null;
      }
    };
    on(button, "pointerdown", () => {
      emitter.issue("inject_gesture", { class_name: name });
      stop();
      timer = schedule(() => emitter.issue("inject_gesture", { class_name: name }),
                       HOLD_REPEAT_MS);
    });
    on(button, "pointerup", stop);
    on(button, "pointerleave", stop);
    cleanups.push(stop);
  }

  const slider = root.querySelector<HTMLInputElement>(".proximity-slider");
  if (slider) {
    on(slider, "input", () => {
      emitter.issue("set_proximity", { distance: Number(slider.value) });
    });
  }

  const presets = root.querySelector<HTMLSelectElement>(".preset-select");
  if (presets) {
    on(presets, "change", () => {
      const running = options.isTreeRunning?.() ?? false;
      const confirm = options.confirm ?? (() => true);
      if (running && !confirm("A task is still running; switch preset and reset the session?")) {
        return;
      }
      emitter.issue("load_preset", { preset: presets.value });
    });
  }

  return {
    dispose() {
      for (const cleanup of cleanups) cleanup();
    },
  };
}
