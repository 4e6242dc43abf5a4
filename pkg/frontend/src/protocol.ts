// Wire protocol shared with the gateway: length-prefixed JSON frames
// (`<decimal byte length>\n<payload>`) over a bidirectional byte stream.
// This module owns the message types, the command/telemetry validators, and
// the incremental frame decoder.

export const GESTURE_CLASS_NAMES = [
  "swipe_left", "swipe_right", "up", "down",
  "swipe_cw", "swipe_ccw", "s", "z", "x",
] as const;
export type GestureClassName = (typeof GESTURE_CLASS_NAMES)[number];
export const NO_GESTURE = "no_gesture";

export const STREAMS = [
  "gesture_recognition", "robot_state", "bt_status", "point_cloud", "metrics",
] as const;
export type Stream = (typeof STREAMS)[number];

export interface GestureEventData {
  class_name: string;
  confidence: number;
  injected?: boolean;
}

export interface RobotStateData {
  sim_time: number;
  guide_pos: number;
  joints: number[];
  gripper: number;
  speed_scale: number;
  estopped: boolean;
  trajectory_active?: boolean;
  guide_velocity_active?: boolean;
  guide_velocity?: number;
  ee_position?: number[];
  ee_quaternion?: number[];
  joint_points?: number[][];
}

export interface BtStatusData {
  tree_id: string;
  node_path: string;
  status: "success" | "failure" | "running";
}

export interface PointCloudData {
  frame_index: number;
  // Rows of [peak, range, doppler, x, y].
  detections: number[][];
}

export interface MetricsData {
  latency_ms: number;
  fps: number;
  dropped_frames?: number;
}

export interface TelemetryMsg {
  type: "telemetry";
  stream: Stream;
  seq: number;
  ts: number;
  data: Record<string, unknown>;
}

export type CommandName =
  | "inject_gesture"
  | "play_gesture"
  | "set_proximity"
  | "estop"
  | "release_estop"
  | "load_preset"
  | "set_speed_override";

export interface CommandMsg {
  type: "command";
  id: number;
  name: CommandName;
  args: Record<string, unknown>;
}

export interface AckMsg {
  type: "ack";
  id: number;
  ok: boolean;
  error: string | null;
}

export interface HelloMsg {
  type: "hello";
  role: "observer" | "controller";
}

export interface WelcomeMsg {
  type: "welcome";
  role: "observer" | "controller";
  protocol: number;
  preset: string;
}

export type ServerMessage = TelemetryMsg | AckMsg | WelcomeMsg;

const COMMAND_ARG_SPECS: Record<CommandName, Record<string, "string" | "number">> = {
  inject_gesture: { class_name: "string" },
  play_gesture: { class_name: "string" },
  set_proximity: { distance: "number" },
  estop: {},
  release_estop: {},
  load_preset: { preset: "string" },
  set_speed_override: { fraction: "number" },
};

export class ProtocolError extends Error {}

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

/** Throws ProtocolError unless the message is a schema-valid command. */
export function validateCommand(msg: unknown): asserts msg is CommandMsg {
  if (!isRecord(msg) || msg.type !== "command") {
    throw new ProtocolError("type must be 'command'");
  }
  if (typeof msg.id !== "number" || !Number.isInteger(msg.id)) {
    throw new ProtocolError("command id must be an integer");
  }
  const name = msg.name;
  if (typeof name !== "string" || !(name in COMMAND_ARG_SPECS)) {
    throw new ProtocolError(`unknown command ${String(name)}`);
  }
  const spec = COMMAND_ARG_SPECS[name as CommandName];
  const args = msg.args;
  if (!isRecord(args)) {
    throw new ProtocolError("args must be an object");
  }
  for (const [key, kind] of Object.entries(spec)) {
    const value = args[key];
    if (value === undefined) {
      throw new ProtocolError(`${name}: missing arg ${key}`);
    }
    if (typeof value !== kind) {
      throw new ProtocolError(`${name}: ${key} must be ${kind}`);
    }
  }
  for (const key of Object.keys(args)) {
    if (!(key in spec)) {
      throw new ProtocolError(`${name}: unexpected arg ${key}`);
    }
  }
  if ("class_name" in args
      && !GESTURE_CLASS_NAMES.includes(args.class_name as GestureClassName)) {
    throw new ProtocolError(`unknown gesture class ${String(args.class_name)}`);
  }
}

/** Parses a server message; returns null for anything malformed (callers
 * count and skip rather than crash). */
export function parseServerMessage(raw: unknown): ServerMessage | null {
  if (!isRecord(raw)) return null;
  if (raw.type === "ack") {
    if (typeof raw.id !== "number" || typeof raw.ok !== "boolean") return null;
    return { type: "ack", id: raw.id, ok: raw.ok, error: (raw.error as string | null) ?? null };
  }
  if (raw.type === "welcome") {
    if (raw.role !== "observer" && raw.role !== "controller") return null;
    if (typeof raw.preset !== "string" || typeof raw.protocol !== "number") return null;
    return { type: "welcome", role: raw.role, protocol: raw.protocol, preset: raw.preset };
  }
  if (raw.type !== "telemetry") return null;
  if (!STREAMS.includes(raw.stream as Stream)) return null;
  if (typeof raw.seq !== "number" || typeof raw.ts !== "number") return null;
  const data = raw.data;
  if (!isRecord(data)) return null;
  switch (raw.stream as Stream) {
    case "gesture_recognition":
      if (typeof data.class_name !== "string" || typeof data.confidence !== "number") return null;
      break;
    case "robot_state":
      if (typeof data.sim_time !== "number" || typeof data.guide_pos !== "number") return null;
      if (!Array.isArray(data.joints) || data.joints.length !== 6) return null;
      if (typeof data.speed_scale !== "number" || typeof data.estopped !== "boolean") return null;
      break;
    case "bt_status":
      if (typeof data.tree_id !== "string") return null;
      if (!["success", "failure", "running"].includes(data.status as string)) return null;
      break;
    case "point_cloud":
      if (typeof data.frame_index !== "number" || !Array.isArray(data.detections)) return null;
      if (!data.detections.every((d) => Array.isArray(d) && d.length === 5)) return null;
      break;
    case "metrics":
      if (typeof data.latency_ms !== "number" || typeof data.fps !== "number") return null;
      break;
  }
  return {
    type: "telemetry",
    stream: raw.stream as Stream,
    seq: raw.seq,
    ts: raw.ts,
    data,
  };
}

const encoder = new TextEncoder();
const decoder = new TextDecoder();

export function encodeFrame(message: unknown): Uint8Array {
  const payload = encoder.encode(JSON.stringify(message));
  const prefix = encoder.encode(`${payload.length}\n`);
  const out = new Uint8Array(prefix.length + payload.length);
  out.set(prefix, 0);
  out.set(payload, prefix.length);
  return out;
}

const MAX_MESSAGE_BYTES = 8 * 1024 * 1024;

/** Incremental decoder for the length-prefixed stream. */
export class FrameDecoder {
  private buffer = new Uint8Array(0);

  feed(chunk: Uint8Array): unknown[] {
    const merged = new Uint8Array(this.buffer.length + chunk.length);
    merged.set(this.buffer, 0);
    merged.set(chunk, this.buffer.length);
    this.buffer = merged;

    const out: unknown[] = [];
    for (;;) {
      const newline = this.buffer.indexOf(0x0a);
      if (newline < 0) {
        if (this.buffer.length > 32) throw new ProtocolError("missing length prefix");
        return out;
      }
      const length = Number(decoder.decode(this.buffer.subarray(0, newline)));
      if (!Number.isInteger(length) || length < 0 || length > MAX_MESSAGE_BYTES) {
        throw new ProtocolError(`bad length prefix`);
      }
      const start = newline + 1;
      if (this.buffer.length < start + length) return out;
      const payload = this.buffer.subarray(start, start + length);
      this.buffer = this.buffer.slice(start + length);
      try {
        out.push(JSON.parse(decoder.decode(payload)));
      } catch (err) {
        throw new ProtocolError(`bad payload: ${String(err)}`);
      }
    }
  }
}
