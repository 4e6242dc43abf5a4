// The dashboard's entire state as one immutable snapshot. Messages fold in
// through applyServerMessage; rendering is a pure function of this model.

import {
  BtStatusData,
  GestureEventData,
  MetricsData,
  parseServerMessage,
  PointCloudData,
  RobotStateData,
  Stream,
  TelemetryMsg,
} from "./protocol.js";

export type ConnectionState = "connecting" | "connected" | "disconnected";

export interface GestureFeedEntry {
  seq: number;
  ts: number;
  class_name: string;
  confidence: number;
  injected: boolean;
}

export interface UiSessionModel {
  connection: ConnectionState;
  role: "observer" | "controller" | null;
  preset: string | null;
  robotState: (RobotStateData & { seq: number }) | null;
  pointCloud: (PointCloudData & { seq: number }) | null;
  btStatus: (BtStatusData & { seq: number }) | null;
  metrics: (MetricsData & { seq: number }) | null;
  events: GestureFeedEntry[]; // newest last, ordered by seq, capped
  proximity: number;
  speedOverride: number;
  malformedCount: number;
  lastSeq: Partial<Record<Stream, number>>;
}

export const EVENT_FEED_CAPACITY = 100;

export function initialModel(): UiSessionModel {
  return {
    connection: "connecting",
    role: null,
    preset: null,
    robotState: null,
    pointCloud: null,
    btStatus: null,
    metrics: null,
    events: [],
    proximity: 2.0,
    speedOverride: 1.0,
    malformedCount: 0,
    lastSeq: {},
  };
}

function applyTelemetry(model: UiSessionModel, msg: TelemetryMsg): UiSessionModel {
  const last = model.lastSeq[msg.stream];
  // Only the latest snapshot per stream is rendered; stale frames drop.
  if (last !== undefined && msg.seq <= last && msg.stream !== "gesture_recognition") {
    return model;
  }
  const next: UiSessionModel = { ...model, lastSeq: { ...model.lastSeq, [msg.stream]: msg.seq } };
  switch (msg.stream) {
    case "robot_state":
      next.robotState = { ...(msg.data as unknown as RobotStateData), seq: msg.seq };
      break;
    case "point_cloud":
      next.pointCloud = { ...(msg.data as unknown as PointCloudData), seq: msg.seq };
      break;
    case "bt_status":
      next.btStatus = { ...(msg.data as unknown as BtStatusData), seq: msg.seq };
      break;
    case "metrics":
      next.metrics = { ...(msg.data as unknown as MetricsData), seq: msg.seq };
      break;
    case "gesture_recognition": {
      const data = msg.data as unknown as GestureEventData;
      const entry: GestureFeedEntry = {
        seq: msg.seq,
        ts: msg.ts,
        class_name: data.class_name,
        confidence: data.confidence,
        injected: Boolean(data.injected),
      };
      const events = [...model.events, entry]
        .sort((a, b) => a.seq - b.seq)
        .slice(-EVENT_FEED_CAPACITY);
      next.events = events;
      break;
    }
  }
  return next;
}

/** Folds one raw wire message into the model; malformed input only bumps a
 * counter, it can never blank the screen. */
export function applyServerMessage(model: UiSessionModel, raw: unknown): UiSessionModel {
  const msg = parseServerMessage(raw);
  if (msg === null) {
    return { ...model, malformedCount: model.malformedCount + 1 };
  }
  if (msg.type === "welcome") {
    return { ...model, role: msg.role, preset: msg.preset };
  }
  if (msg.type === "ack") {
    return model; // acks surface through the command emitter, not the model
  }
  return applyTelemetry(model, msg);
}

export function applyConnectionState(model: UiSessionModel, state: ConnectionState): UiSessionModel {
  if (state === model.connection) return model;
  const next = { ...model, connection: state };
  if (state !== "connected") {
    next.role = null;
  }
  return next;
}

export function setProximity(model: UiSessionModel, value: number): UiSessionModel {
  return { ...model, proximity: value };
}
