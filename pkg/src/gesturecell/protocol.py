"""Wire protocol between the gateway and operator clients.

Framing: each message is `<decimal byte length>\\n<payload>`, payload UTF-8
JSON. Streams flow server to client as telemetry envelopes; clients send
hello once, then commands; the server answers each command with an ack.

    telemetry  {"type": "telemetry", "stream": S, "seq": int, "ts": float, "data": {...}}
    command    {"type": "command", "id": int, "name": N, "args": {...}}
    ack        {"type": "ack", "id": int, "ok": bool, "error": str | null}
    hello      {"type": "hello", "role": "observer" | "controller"}
    welcome    {"type": "welcome", "role": str, "protocol": 1, "preset": str}

Streams: gesture_recognition {class_name, confidence}; robot_state (full
snapshot incl. end-effector pose and joint points); bt_status {tree_id,
node_path, status}; point_cloud {frame_index, detections: [[peak, range,
doppler, x, y]]}; metrics {latency_ms, fps, dropped_telemetry}.

Commands: inject_gesture{class_name}, play_gesture{class_name},
set_proximity{distance}, estop{}, release_estop{}, load_preset{preset},
set_speed_override{fraction}.
"""

from __future__ import annotations

import json
from typing import Iterator

PROTOCOL_VERSION = 1

GESTURE_CLASS_NAMES = (
    "swipe_left", "swipe_right", "up", "down",
    "swipe_cw", "swipe_ccw", "s", "z", "x",
)
NO_GESTURE = "no_gesture"

STREAMS = ("gesture_recognition", "robot_state", "bt_status", "point_cloud", "metrics")

COMMAND_ARGS: dict[str, dict[str, type]] = {
    "inject_gesture": {"class_name": str},
    "play_gesture": {"class_name": str},
    "set_proximity": {"distance": float},
    "estop": {},
    "release_estop": {},
    "load_preset": {"preset": str},
    "set_speed_override": {"fraction": float},
}


class ProtocolError(ValueError):
    """Message violates the wire schema."""


def encode_message(message: dict) -> bytes:
    payload = json.dumps(message, separators=(",", ":")).encode("utf-8")
    return str(len(payload)).encode("ascii") + b"\n" + payload


class FrameDecoder:
    """Incremental decoder for the length-prefixed stream."""

    MAX_MESSAGE_BYTES = 8 * 1024 * 1024

    def __init__(self) -> None:
        self._buffer = bytearray()

    def feed(self, data: bytes) -> Iterator[dict]:
        self._buffer.extend(data)
        while True:
            newline = self._buffer.find(b"\n")
            if newline < 0:
                if len(self._buffer) > 32:
                    raise ProtocolError("missing length prefix")
                return
            try:
                length = int(self._buffer[:newline])
            except ValueError:
                raise ProtocolError(f"bad length prefix {bytes(self._buffer[:newline])!r}") from None
            if not 0 <= length <= self.MAX_MESSAGE_BYTES:
                raise ProtocolError(f"unreasonable message length {length}")
            start = newline + 1
            if len(self._buffer) < start + length:
                return
            payload = bytes(self._buffer[start : start + length])
            del self._buffer[: start + length]
            try:
                yield json.loads(payload.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise ProtocolError(f"bad payload: {exc}") from exc


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ProtocolError(message)


def validate_command(msg: dict) -> None:
    _require(msg.get("type") == "command", "type must be 'command'")
    _require(isinstance(msg.get("id"), int), "command id must be an int")
    name = msg.get("name")
    _require(name in COMMAND_ARGS, f"unknown command {name!r}")
    args = msg.get("args", {})
    _require(isinstance(args, dict), "args must be an object")
    spec = COMMAND_ARGS[name]
    for key, kind in spec.items():
        _require(key in args, f"{name}: missing arg {key!r}")
        value = args[key]
        if kind is float:
            _require(isinstance(value, (int, float)) and not isinstance(value, bool),
                     f"{name}: {key} must be a number")
        else:
            _require(isinstance(value, kind), f"{name}: {key} must be {kind.__name__}")
    extra = set(args) - set(spec)
    _require(not extra, f"{name}: unexpected args {sorted(extra)}")
    if "class_name" in args:
        _require(args["class_name"] in GESTURE_CLASS_NAMES,
                 f"unknown gesture class {args['class_name']!r}")


def validate_telemetry(msg: dict) -> None:
    _require(msg.get("type") == "telemetry", "type must be 'telemetry'")
    _require(msg.get("stream") in STREAMS, f"unknown stream {msg.get('stream')!r}")
    _require(isinstance(msg.get("seq"), int), "seq must be an int")
    _require(isinstance(msg.get("ts"), (int, float)), "ts must be a number")
    data = msg.get("data")
    _require(isinstance(data, dict), "data must be an object")
    stream = msg["stream"]
    if stream == "gesture_recognition":
        _require(data.get("class_name") in GESTURE_CLASS_NAMES + (NO_GESTURE,),
                 f"bad class_name {data.get('class_name')!r}")
        _require(isinstance(data.get("confidence"), (int, float)), "confidence must be a number")
    elif stream == "robot_state":
        for key in ("sim_time", "guide_pos", "gripper", "speed_scale"):
            _require(isinstance(data.get(key), (int, float)), f"{key} must be a number")
        _require(isinstance(data.get("joints"), list) and len(data["joints"]) == 6,
                 "joints must be a list of 6")
        _require(isinstance(data.get("estopped"), bool), "estopped must be a bool")
    elif stream == "bt_status":
        _require(isinstance(data.get("tree_id"), str), "tree_id must be a string")
        _require(data.get("status") in ("success", "failure", "running"),
                 f"bad status {data.get('status')!r}")
    elif stream == "point_cloud":
        _require(isinstance(data.get("frame_index"), int), "frame_index must be an int")
        dets = data.get("detections")
        _require(isinstance(dets, list), "detections must be a list")
        for d in dets:
            _require(isinstance(d, list) and len(d) == 5, "each detection is [peak, range, doppler, x, y]")
    elif stream == "metrics":
        for key in ("latency_ms", "fps"):
            _require(isinstance(data.get(key), (int, float)), f"{key} must be a number")


def telemetry(stream: str, seq: int, ts: float, data: dict) -> dict:
    msg = {"type": "telemetry", "stream": stream, "seq": seq, "ts": ts, "data": data}
    validate_telemetry(msg)
    return msg


def ack(command_id: int, ok: bool, error: str | None = None) -> dict:
    return {"type": "ack", "id": command_id, "ok": ok, "error": error}
