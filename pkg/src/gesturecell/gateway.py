"""Composition root: frames -> DSP -> segmentation -> classification ->
behavior trees -> robot simulation, in one fixed-rate loop.

A Session owns every stage and advances one radar frame per step(): acquire
(synthesized live scene or replayed detections), extract detections, push
into the segmenter, classify on emission, dispatch to the behavior-tree
engine, advance the simulator, and publish telemetry. Telemetry goes to
subscriber callbacks (the socket server fans these out); commands arrive via
a queue with a priority lane for emergency stop. All timestamps in published
events are simulation time, so a recorded session replays byte-identically.
"""

from __future__ import annotations

import json
import logging
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np

from .bt import BTEngine, World, load_preset
from .net import GestureNet, load_checkpoint, predict
from .protocol import NO_GESTURE, telemetry
from .radar import CfarParams, Detection, FrameDetections, RadarConfig, extract_frame
from .robot import RobotSim, joint_frames, load_pose_registry
from .scene import (
    EnvironmentKind,
    GestureClass,
    GestureScript,
    InterfererWalk,
    environment,
    synth_gesture_sequence,
    synth_idle_cube,
)
from .segmenter import Segmenter, SegmenterConfig

log = logging.getLogger(__name__)

SIM_DT = 0.01
RECORD_VERSION = 1


class SourceKind(Enum):
    SYNTHETIC_LIVE = "synthetic_live"
    FILE_REPLAY = "file_replay"


class StartupError(RuntimeError):
    """Session could not be assembled (missing checkpoint, bad preset, ...)."""


@dataclass(frozen=True)
class PipelineConfig:
    checkpoint_path: str | Path
    preset: str = "test1_pick_place"
    source: SourceKind = SourceKind.SYNTHETIC_LIVE
    radar: RadarConfig = field(default_factory=RadarConfig)
    segmenter: SegmenterConfig = field(default_factory=SegmenterConfig)
    cfar: CfarParams = field(default_factory=lambda: CfarParams(scale=8.0))
    notch: int = 1
    environment: EnvironmentKind = EnvironmentKind.HAND_ONLY
    confidence_threshold: float = 0.8
    loop_hz: float = 0.0   # 0 = radar frame rate
    seed: int = 0

    @property
    def effective_loop_hz(self) -> float:
        frame_rate = 1.0 / self.radar.frame_period
        if self.loop_hz == 0.0:
            return frame_rate
        if self.loop_hz < frame_rate:
            raise ValueError(f"loop rate {self.loop_hz} Hz below radar frame rate {frame_rate} Hz")
        return self.loop_hz


class Session:
    """One live pipeline. Single-threaded: step() is the only mutator; the
    socket server forwards commands into the queue and telemetry out."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        path = Path(config.checkpoint_path)
        if not path.exists():
            raise StartupError(f"checkpoint not found: {path}")
        try:
            self.net: GestureNet = load_checkpoint(path)
        except ValueError as exc:
            raise StartupError(f"cannot load checkpoint {path}: {exc}") from exc
        self.registry = load_pose_registry()
        from .bt import PRESET_ALIASES

        self.preset_name = PRESET_ALIASES.get(config.preset, config.preset)
        try:
            self.bt_config = load_preset(self.preset_name, self.registry)
        except KeyError as exc:
            raise StartupError(str(exc)) from exc
        self.sim = RobotSim(initial_q=self.registry.pose("home"))
        self.world = World(self.sim, self.registry)
        self.engine = BTEngine(self.world, self.bt_config, config.confidence_threshold)
        self.segmenter = Segmenter(config.segmenter, self.net.normalizer)
        self.env_profile = environment(config.environment)

        self._subscribers: list[Callable[[dict], None]] = []
        self._seq: dict[str, int] = {}
        self._frame_index = 0
        self._event_seq = 0
        self._pending_cubes: deque = deque()
        self._noise_rng = np.random.default_rng([config.seed, 0xD1CE])
        self._idle_interferer = InterfererWalk(
            self.env_profile, np.random.default_rng([config.seed, 0xA11E]))
        self._play_count = 0
        self._commands_priority: deque = deque()
        self._commands: deque = deque()
        self._recorder = None
        self._last_latency_ms = 0.0
        self._fps_clock = time.perf_counter()
        self._fps_frames = 0
        self._fps = 0.0
        self.events: list[dict] = []
        self._sub_steps = max(1, round(config.radar.frame_period / SIM_DT))

    # -- telemetry ----------------------------------------------------------

    def subscribe(self, callback: Callable[[dict], None]) -> None:
        self._subscribers.append(callback)

    def _publish(self, stream: str, data: dict) -> dict:
        seq = self._seq.get(stream, 0)
        self._seq[stream] = seq + 1
        msg = telemetry(stream, seq, self.sim.snapshot().sim_time, data)
        if self._recorder is not None and stream == "gesture_recognition":
            self._record({"kind": "event", **msg})
        for callback in self._subscribers:
            callback(msg)
        return msg

    def _publish_robot_state(self) -> None:
        state = self.sim.snapshot()
        pos, quat = self.sim.end_effector()
        points = joint_frames(state.q)
        self._publish("robot_state", {
            "sim_time": state.sim_time,
            "guide_pos": state.guide_pos,
            "joints": list(state.joints),
            "gripper": state.gripper,
            "speed_scale": state.speed_scale,
            "estopped": state.estopped,
            "trajectory_active": state.trajectory_active,
            "guide_velocity_active": state.guide_velocity_active,
            "guide_velocity": self.sim.current_guide_velocity(),
            "ee_position": [float(v) for v in pos],
            "ee_quaternion": [float(v) for v in quat],
            "joint_points": [[float(v) for v in p] for p in points],
        })

    # -- commands -----------------------------------------------------------

    def enqueue_command(self, name: str, args: dict | None = None,
                        on_done: Callable[[bool, str | None], None] | None = None) -> None:
        """Estop takes the priority lane; commands are never dropped. The
        optional callback fires with the execution result on the loop thread."""
        entry = (name, args or {}, on_done)
        if name == "estop":
            self._commands_priority.append(entry)
        else:
            self._commands.append(entry)

    def handle_command(self, name: str, args: dict | None = None) -> tuple[bool, str | None]:
        args = args or {}
        try:
            if name == "estop":
                was_busy = self.engine.busy
                self.engine.abort()
                self.sim.emergency_stop()
                if was_busy and self.engine.last_event is not None:
                    event = self.engine.last_event
                    self._publish("bt_status", {
                        "tree_id": event.tree_id,
                        "node_path": event.node_path,
                        "status": event.status.value,
                    })
                return True, None
            if name == "release_estop":
                self.sim.release_estop()
                return True, None
            if name == "inject_gesture":
                gesture = GestureClass.from_name(args["class_name"])
                self._emit_gesture_event(gesture, 1.0, injected=True)
                return True, None
            if name == "play_gesture":
                gesture = GestureClass.from_name(args["class_name"])
                self._queue_gesture_frames(gesture)
                return True, None
            if name == "set_proximity":
                self.sim.set_human_distance(float(args["distance"]))
                return True, None
            if name == "set_speed_override":
                self.sim.set_speed_override(float(args["fraction"]))
                return True, None
            if name == "load_preset":
                from .bt import PRESET_ALIASES

                preset_name = PRESET_ALIASES.get(args["preset"], args["preset"])
                self.bt_config = load_preset(preset_name, self.registry)
                self.engine.load_config(self.bt_config)
                self.preset_name = preset_name
                self.sim.release_estop()
                self.segmenter.reset()
                return True, None
            return False, f"unknown command {name!r}"
        except (KeyError, ValueError) as exc:
            return False, str(exc)

    def _drain_commands(self) -> None:
        for queue in (self._commands_priority, self._commands):
            while queue:
                name, args, on_done = queue.popleft()
                self._record_command(name, args)
                ok, error = self.handle_command(name, args)
                if on_done is not None:
                    on_done(ok, error)

    # -- gesture synthesis ---------------------------------------------------

    def _queue_gesture_frames(self, gesture: GestureClass) -> None:
        rng = np.random.default_rng([self.config.seed, 0x9E57, self._play_count])
        self._play_count += 1
        script = GestureScript(
            gesture=gesture,
            duration=float(rng.uniform(0.9, 1.4)),
            extent=float(rng.uniform(0.15, 0.28)),
            center=(float(rng.uniform(-0.08, 0.08)), float(rng.uniform(0.28, 0.42))),
        )
        cubes = synth_gesture_sequence(script, self.env_profile, self.config.radar, seed=rng)
        self._pending_cubes.extend(cubes)

    def _idle_cube(self):
        return synth_idle_cube(
            self.env_profile, self.config.radar,
            noise_rng=self._noise_rng, interferer=self._idle_interferer,
        )

    def _next_frame(self) -> FrameDetections:
        cube = self._pending_cubes.popleft() if self._pending_cubes else self._idle_cube()
        return extract_frame(
            cube, self.config.cfar, notch=self.config.notch,
            frame_index=self._frame_index,
        )

    # -- events --------------------------------------------------------------

    def _emit_gesture_event(self, gesture: GestureClass | None, confidence: float,
                            injected: bool = False) -> None:
        name = gesture.canonical_name if gesture is not None else NO_GESTURE
        msg = self._publish("gesture_recognition", {
            "class_name": name,
            "confidence": round(float(confidence), 6),
            "injected": injected,
        })
        self.events.append(msg)
        if gesture is not None and confidence >= self.config.confidence_threshold:
            from .bt import DispatchResult

            result = self.engine.on_gesture(gesture, confidence)
            if result is DispatchResult.ESTOP and self.engine.last_event is not None:
                event = self.engine.last_event
                self._publish("bt_status", {
                    "tree_id": event.tree_id,
                    "node_path": event.node_path,
                    "status": event.status.value,
                })

    # -- main loop ------------------------------------------------------------

    def step(self, frame: FrameDetections | None = None) -> None:
        """One loop iteration = one radar frame period."""
        ingest_start = time.perf_counter()
        self._drain_commands()

        if frame is None:
            frame = self._next_frame()
        self._record_frame(frame)
        self._publish("point_cloud", {
            "frame_index": frame.frame_index,
            "detections": [[d.peak, d.range, d.doppler, d.x, d.y] for d in frame.detections],
        })

        emission = self.segmenter.push_frame(frame)
        if emission is not None:
            result = predict(self.net, emission.matrix, confidence_threshold=0.0)
            gesture, confidence = result if result is not None else (None, 0.0)
            if confidence < self.config.confidence_threshold:
                self._emit_gesture_event(None, confidence)
            else:
                self._emit_gesture_event(gesture, confidence)
            self._last_latency_ms = (time.perf_counter() - ingest_start) * 1e3

        event = self.engine.tick()
        if event is not None:
            self._publish("bt_status", {
                "tree_id": event.tree_id,
                "node_path": event.node_path,
                "status": event.status.value,
            })

        for _ in range(self._sub_steps):
            self.sim.step(SIM_DT)
        self._publish_robot_state()
        if self._recorder is not None:
            state = self.sim.snapshot()
            self._record({
                "kind": "robot", "t": state.sim_time,
                "q": [float(v) for v in state.q], "gripper": state.gripper,
                "speed_scale": state.speed_scale,
                "skill": self.engine.last_event.node_path if self.engine.busy and self.engine.last_event else None,
            })

        self._frame_index += 1
        self._fps_frames += 1
        now = time.perf_counter()
        if now - self._fps_clock >= 1.0:
            self._fps = self._fps_frames / (now - self._fps_clock)
            self._fps_frames = 0
            self._fps_clock = now
        if self._frame_index % 25 == 0:
            self._publish("metrics", {
                "latency_ms": round(self._last_latency_ms, 3),
                "fps": round(self._fps, 2),
                "dropped_frames": self.segmenter.dropped_frames,
            })

    def run(self, n_frames: int, realtime: bool = False) -> None:
        period = 1.0 / self.config.effective_loop_hz
        next_deadline = time.perf_counter()
        for _ in range(n_frames):
            self.step()
            if realtime:
                next_deadline += period
                delay = next_deadline - time.perf_counter()
                if delay > 0:
                    time.sleep(delay)

    def run_until_idle(self, max_frames: int = 2000) -> bool:
        """Step until the engine has no running tree and no cubes are queued."""
        for _ in range(max_frames):
            self.step()
            if (not self.engine.busy and not self._pending_cubes
                    and self.segmenter.mode.value == "idle"):
                return True
        return False

    # -- persistence -----------------------------------------------------------

    def start_recording(self, path: str | Path) -> None:
        self._recorder = open(path, "w")
        self._record({
            "kind": "header", "version": RECORD_VERSION,
            "preset": self.config.preset,
            "seed": self.config.seed,
            "checkpoint": str(self.config.checkpoint_path),
            "environment": self.config.environment.value,
        })

    def stop_recording(self) -> None:
        if self._recorder is not None:
            state = self.sim.snapshot()
            self._record({
                "kind": "final_state",
                "guide_pos": state.guide_pos,
                "joints": list(state.joints),
                "gripper": state.gripper,
                "sim_time": state.sim_time,
            })
            self._recorder.close()
            self._recorder = None

    def _record(self, doc: dict) -> None:
        if self._recorder is not None:
            self._recorder.write(json.dumps(doc, separators=(",", ":")) + "\n")

    def _record_frame(self, frame: FrameDetections) -> None:
        self._record({
            "kind": "frame", "i": frame.frame_index,
            "detections": [[d.peak, d.range, d.doppler, d.x, d.y] for d in frame.detections],
        })

    def _record_command(self, name: str, args: dict) -> None:
        self._record({"kind": "command", "i": self._frame_index, "name": name, "args": args})


def run_session(config: PipelineConfig) -> Session:
    """Assemble and return a ready session; raises StartupError on bad config."""
    return Session(config)


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------

@dataclass
class ReplayReport:
    n_frames: int
    truncated_records: int
    recorded_events: list[dict]
    replayed_events: list[dict]
    final_state_matches: bool

    @property
    def events_identical(self) -> bool:
        def strip(events):
            return [
                {k: v for k, v in e.items() if k != "kind"}
                for e in events
            ]
        return strip(self.recorded_events) == strip(self.replayed_events)


def read_session_log(path: str | Path) -> tuple[list[dict], int]:
    """All complete records; a trailing partial line counts as truncated."""
    records = []
    truncated = 0
    with open(path) as fh:
        for line in fh:
            if not line.endswith("\n"):
                truncated += 1
                break
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                truncated += 1
                break
    return records, truncated


def replay_session(log_path: str | Path, checkpoint_path: str | Path | None = None) -> ReplayReport:
    """Re-run a recorded session from its logged inputs and commands; with the
    same checkpoint the gesture events and final state reproduce exactly."""
    records, truncated = read_session_log(log_path)
    header = records[0] if records and records[0].get("kind") == "header" else None
    if header is not None and header.get("version") != RECORD_VERSION:
        raise ValueError(f"unsupported session log version {header.get('version')}")

    if header is None:
        return ReplayReport(0, truncated, [], [], final_state_matches=True)

    config = PipelineConfig(
        checkpoint_path=checkpoint_path or header["checkpoint"],
        preset=header["preset"],
        seed=header["seed"],
        environment=EnvironmentKind(header["environment"]),
        source=SourceKind.FILE_REPLAY,
    )
    session = Session(config)

    commands_by_frame: dict[int, list[dict]] = {}
    frames: list[dict] = []
    recorded_events: list[dict] = []
    final_state = None
    for rec in records[1:]:
        kind = rec.get("kind")
        if kind == "frame":
            frames.append(rec)
        elif kind == "command":
            commands_by_frame.setdefault(rec["i"], []).append(rec)
        elif kind == "event":
            recorded_events.append({k: v for k, v in rec.items() if k != "kind"})
        elif kind == "final_state":
            final_state = rec

    for rec in frames:
        for cmd in commands_by_frame.get(rec["i"], []):
            session.enqueue_command(cmd["name"], cmd["args"])
        frame = FrameDetections(
            frame_index=rec["i"],
            detections=[Detection(*row) for row in rec["detections"]],
        )
        session.step(frame)

    state = session.sim.snapshot()
    matches = True
    if final_state is not None:
        matches = (
            abs(state.guide_pos - final_state["guide_pos"]) < 1e-9
            and np.allclose(state.joints, final_state["joints"], atol=1e-9)
            and abs(state.gripper - final_state["gripper"]) < 1e-9
        )
    return ReplayReport(
        n_frames=len(frames),
        truncated_records=truncated,
        recorded_events=recorded_events,
        replayed_events=[{k: v for k, v in e.items() if k != "kind"} for e in session.events],
        final_state_matches=matches,
    )


# ---------------------------------------------------------------------------
# Scripted demos (headless case studies)
# ---------------------------------------------------------------------------

TEST1_PLAYLIST = (
    GestureClass.SWIPE_RIGHT, GestureClass.SWIPE_CCW, GestureClass.DOWN,
    GestureClass.SWIPE_CW, GestureClass.SWIPE_RIGHT, GestureClass.SWIPE_LEFT,
    GestureClass.S, GestureClass.SWIPE_LEFT, GestureClass.UP,
)
TEST3_PLAYLIST = (
    GestureClass.SWIPE_RIGHT, GestureClass.DOWN, GestureClass.SWIPE_LEFT,
    GestureClass.Z, GestureClass.SWIPE_RIGHT, GestureClass.X,
    GestureClass.SWIPE_LEFT, GestureClass.SWIPE_CW, GestureClass.SWIPE_CCW,
    GestureClass.UP,
)

DEMO_PLAYLISTS = {
    "test1": ("test1_pick_place", TEST1_PLAYLIST),
    "test3": ("test3_pour", TEST3_PLAYLIST),
}


@dataclass
class DemoReport:
    preset: str
    playlist: tuple
    recognized: list[str]
    skill_results: list[tuple[str, str]]
    final_q: np.ndarray
    home_q: np.ndarray
    wall_seconds: float

    @property
    def all_skills_succeeded(self) -> bool:
        return (len(self.skill_results) == len(self.playlist)
                and all(status == "success" for _, status in self.skill_results))

    @property
    def recognized_correctly(self) -> bool:
        return self.recognized == [g.canonical_name for g in self.playlist]

    @property
    def at_home(self) -> bool:
        return bool(np.allclose(self.final_q, self.home_q, atol=1e-3))

    @property
    def success(self) -> bool:
        return self.all_skills_succeeded and self.recognized_correctly and self.at_home

    def summary(self) -> str:
        lines = [
            f"demo {self.preset}: {'PASS' if self.success else 'FAIL'} "
            f"({self.wall_seconds:.1f}s wall)",
            f"  recognized: {self.recognized}",
            f"  skills: {self.skill_results}",
            f"  at home: {self.at_home}",
        ]
        return "\n".join(lines)


def run_demo(
    test: str,
    checkpoint_path: str | Path,
    seed: int = 0,
    env_kind: EnvironmentKind = EnvironmentKind.HAND_ONLY,
    record_path: str | Path | None = None,
) -> DemoReport:
    """Feed a case-study gesture playlist through the full pipeline."""
    if test not in DEMO_PLAYLISTS:
        raise KeyError(f"unknown demo {test!r}; available: {sorted(DEMO_PLAYLISTS)}")
    preset, playlist = DEMO_PLAYLISTS[test]
    config = PipelineConfig(
        checkpoint_path=checkpoint_path, preset=preset,
        seed=seed, environment=env_kind,
    )
    session = Session(config)
    if record_path is not None:
        session.start_recording(record_path)
    t0 = time.perf_counter()
    for gesture in playlist:
        if not session.run_until_idle():
            break
        session.enqueue_command("play_gesture", {"class_name": gesture.canonical_name})
        if not session.run_until_idle():
            break
    session.run_until_idle()
    wall = time.perf_counter() - t0
    if record_path is not None:
        session.stop_recording()

    # Sub-threshold windows publish no_gesture and dispatch nothing; the
    # case-study criterion is the dispatched sequence and the skill outcomes.
    recognized = [
        e["data"]["class_name"] for e in session.events
        if not e["data"].get("injected") and e["data"]["class_name"] != NO_GESTURE
    ]
    return DemoReport(
        preset=preset,
        playlist=playlist,
        recognized=recognized,
        skill_results=[(tree, status.value) for tree, status in session.engine.completed],
        final_q=session.sim.snapshot().q,
        home_q=session.registry.pose("home"),
        wall_seconds=wall,
    )
