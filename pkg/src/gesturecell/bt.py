"""Behavior trees driving robot skills, triggered by recognized gestures.

Composites use memory semantics: within one execution a Sequence/Fallback
resumes at its Running child; returning a terminal status resets the subtree
so the next launch starts fresh. Gestures arriving while a tree runs are
rejected (never queued), except the session's emergency-stop gesture, which
aborts the running tree and fires immediately.

Tree definitions and gesture bindings load from a JSON config (see
presets/), validated against the pose/trajectory registry at load time.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Callable

from .robot import GuideVelocityState, PlanningError, PoseRegistry, RobotSim
from .scene import GestureClass

log = logging.getLogger(__name__)


class TickStatus(Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    RUNNING = "running"


class ConfigParseError(ValueError):
    """Malformed tree/binding config; message carries line/column context."""


class World:
    """What actions and conditions run against: the simulated robot, the
    pose/trajectory registry, and named predicates."""

    def __init__(self, sim: RobotSim, registry: PoseRegistry,
                 predicates: dict[str, Callable[["World"], bool]] | None = None):
        self.sim = sim
        self.registry = registry
        self.predicates = dict(DEFAULT_PREDICATES)
        if predicates:
            self.predicates.update(predicates)


DEFAULT_PREDICATES: dict[str, Callable[[World], bool]] = {
    "estop_clear": lambda world: not world.sim.snapshot().estopped,
    "gripper_open": lambda world: world.sim.snapshot().gripper >= 0.9,
    "gripper_closed": lambda world: world.sim.snapshot().gripper <= 0.5,
}


# -- skills ------------------------------------------------------------------

@dataclass(frozen=True)
class MoveToNamedPose:
    pose_id: str
    speed_fraction: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.speed_fraction <= 1.0:
            raise ValueError("speed fraction must be in (0, 1]")

    def label(self) -> str:
        return f"move_to({self.pose_id})"


@dataclass(frozen=True)
class SetGripper:
    aperture: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.aperture <= 1.0:
            raise ValueError("gripper aperture must be in [0, 1]")

    def label(self) -> str:
        return f"set_gripper({self.aperture})"


@dataclass(frozen=True)
class ExecuteTrajectory:
    trajectory_id: str

    def label(self) -> str:
        return f"execute_trajectory({self.trajectory_id})"


@dataclass(frozen=True)
class GuideVelocity:
    v_nom: float
    decay_time: float = 1.0

    def label(self) -> str:
        return f"guide_velocity({self.v_nom:+.3f})"


@dataclass(frozen=True)
class EmergencyStop:
    def label(self) -> str:
        return "emergency_stop"


@dataclass(frozen=True)
class Wait:
    seconds: float

    def label(self) -> str:
        return f"wait({self.seconds})"


SkillSpec = MoveToNamedPose | SetGripper | ExecuteTrajectory | GuideVelocity | EmergencyStop | Wait

_GRIPPER_TOLERANCE = 1e-3


# -- nodes -------------------------------------------------------------------

class Action:
    """Leaf that starts its skill on first tick and polls it afterwards;
    in-progress maps to Running, done to Success, faults to Failure."""

    def __init__(self, skill: SkillSpec):
        self.skill = skill
        self._started = False
        self._wait_start: float | None = None

    def reset(self) -> None:
        self._started = False
        self._wait_start = None

    def label(self) -> str:
        return f"action:{self.skill.label()}"

    def active_path(self) -> str:
        return self.label()

    def tick(self, world: World) -> TickStatus:
        status = self._tick_inner(world)
        if status is not TickStatus.RUNNING:
            self.reset()
        return status

    def _tick_inner(self, world: World) -> TickStatus:
        sim = world.sim
        skill = self.skill
        if isinstance(skill, MoveToNamedPose):
            if not self._started:
                try:
                    pose = world.registry.pose(skill.pose_id)
                    sim.move_to(pose, skill.speed_fraction)
                except (KeyError, PlanningError) as exc:
                    log.warning("move_to(%s) failed: %s", skill.pose_id, exc)
                    return TickStatus.FAILURE
                self._started = True
                return TickStatus.RUNNING
            return TickStatus.SUCCESS if sim.trajectory_done() else TickStatus.RUNNING
        if isinstance(skill, SetGripper):
            if not self._started:
                sim.command_gripper(skill.aperture)
                self._started = True
                return TickStatus.RUNNING
            done = abs(sim.snapshot().gripper - skill.aperture) <= _GRIPPER_TOLERANCE
            return TickStatus.SUCCESS if done else TickStatus.RUNNING
        if isinstance(skill, ExecuteTrajectory):
            if not self._started:
                try:
                    snapshot = sim.snapshot()
                    traj = world.registry.rebased_trajectory(skill.trajectory_id, snapshot.q)
                    sim.command_trajectory(traj)
                except KeyError as exc:
                    log.warning("execute_trajectory(%s) failed: %s", skill.trajectory_id, exc)
                    return TickStatus.FAILURE
                self._started = True
                return TickStatus.RUNNING
            return TickStatus.SUCCESS if sim.trajectory_done() else TickStatus.RUNNING
        if isinstance(skill, GuideVelocity):
            sim.command_guide_velocity(GuideVelocityState(
                v_nom=skill.v_nom, decay_time=skill.decay_time))
            return TickStatus.SUCCESS
        if isinstance(skill, EmergencyStop):
            sim.emergency_stop()
            return TickStatus.SUCCESS
        if isinstance(skill, Wait):
            now = sim.snapshot().sim_time
            if self._wait_start is None:
                self._wait_start = now
            return TickStatus.SUCCESS if now - self._wait_start >= skill.seconds else TickStatus.RUNNING
        log.warning("unknown skill %r", skill)
        return TickStatus.FAILURE


class Condition:
    """Instant check of a named predicate; unknown ids fail with a log."""

    def __init__(self, predicate_id: str):
        self.predicate_id = predicate_id

    def reset(self) -> None:
        pass

    def label(self) -> str:
        return f"cond:{self.predicate_id}"

    def active_path(self) -> str:
        return self.label()

    def tick(self, world: World) -> TickStatus:
        predicate = world.predicates.get(self.predicate_id)
        if predicate is None:
            log.warning("unknown predicate %r", self.predicate_id)
            return TickStatus.FAILURE
        return TickStatus.SUCCESS if predicate(world) else TickStatus.FAILURE


class Sequence:
    """Ticks children left to right; first non-Success wins. Running
    memorizes the resume index; terminal status resets the subtree."""

    def __init__(self, children: list):
        if not children:
            raise ValueError("composite needs at least one child")
        self.children = children
        self._idx = 0

    def reset(self) -> None:
        self._idx = 0
        for child in self.children:
            child.reset()

    def label(self) -> str:
        return "sequence"

    def active_path(self) -> str:
        idx = min(self._idx, len(self.children) - 1)
        return f"sequence[{idx}]/{self.children[idx].active_path()}"

    def tick(self, world: World) -> TickStatus:
        while self._idx < len(self.children):
            status = self.children[self._idx].tick(world)
            if status is TickStatus.RUNNING:
                return TickStatus.RUNNING
            if status is TickStatus.FAILURE:
                self.reset()
                return TickStatus.FAILURE
            self._idx += 1
        self.reset()
        return TickStatus.SUCCESS


class Fallback:
    """Ticks children left to right; first non-Failure wins."""

    def __init__(self, children: list):
        if not children:
            raise ValueError("composite needs at least one child")
        self.children = children
        self._idx = 0

    def reset(self) -> None:
        self._idx = 0
        for child in self.children:
            child.reset()

    def label(self) -> str:
        return "fallback"

    def active_path(self) -> str:
        idx = min(self._idx, len(self.children) - 1)
        return f"fallback[{idx}]/{self.children[idx].active_path()}"

    def tick(self, world: World) -> TickStatus:
        while self._idx < len(self.children):
            status = self.children[self._idx].tick(world)
            if status is TickStatus.RUNNING:
                return TickStatus.RUNNING
            if status is TickStatus.SUCCESS:
                self.reset()
                return TickStatus.SUCCESS
            self._idx += 1
        self.reset()
        return TickStatus.FAILURE


BTNode = Action | Condition | Sequence | Fallback


def tick(tree: BTNode, world: World) -> TickStatus:
    return tree.tick(world)


# -- declarative config ------------------------------------------------------

_SKILL_BUILDERS = {
    "move_to_named_pose": lambda node: MoveToNamedPose(
        pose_id=node["pose"], speed_fraction=float(node.get("speed", 1.0))),
    "set_gripper": lambda node: SetGripper(aperture=float(node["aperture"])),
    "execute_trajectory": lambda node: ExecuteTrajectory(trajectory_id=node["trajectory"]),
    "guide_velocity": lambda node: GuideVelocity(
        v_nom=float(node["v_nom"]), decay_time=float(node.get("decay_time", 1.0))),
    "emergency_stop": lambda node: EmergencyStop(),
    "wait": lambda node: Wait(seconds=float(node["seconds"])),
}


@dataclass(frozen=True)
class BTConfig:
    """Parsed tree definitions plus the session's gesture binding table."""

    trees: dict[str, dict]
    bindings: dict[GestureClass, str]
    estop_gesture: GestureClass | None = None

    def instantiate(self, tree_id: str) -> BTNode:
        if tree_id not in self.trees:
            raise KeyError(f"unknown tree {tree_id!r}")
        return _build_node(self.trees[tree_id], f"trees.{tree_id}")


def _build_node(node: dict, where: str) -> BTNode:
    kind = node.get("type")
    if kind in ("sequence", "fallback"):
        children_spec = node.get("children", [])
        if not children_spec:
            raise ConfigParseError(f"{where}: composite needs at least one child")
        children = [
            _build_node(child, f"{where}.children[{i}]")
            for i, child in enumerate(children_spec)
        ]
        return Sequence(children) if kind == "sequence" else Fallback(children)
    if kind == "condition":
        if "predicate" not in node:
            raise ConfigParseError(f"{where}: condition needs a predicate id")
        return Condition(node["predicate"])
    if kind == "action":
        skill_name = node.get("skill")
        builder = _SKILL_BUILDERS.get(skill_name)
        if builder is None:
            raise ConfigParseError(f"{where}: unknown skill {skill_name!r}")
        try:
            return Action(builder(node))
        except (KeyError, ValueError) as exc:
            raise ConfigParseError(f"{where}: bad skill parameters: {exc}") from exc
    raise ConfigParseError(f"{where}: unknown node type {kind!r}")


def _validate_ids(config: BTConfig, registry: PoseRegistry | None) -> None:
    def walk(node: dict, where: str):
        if node.get("type") == "action":
            if registry is not None:
                if node.get("skill") == "move_to_named_pose" and node["pose"] not in registry.poses:
                    raise ConfigParseError(f"{where}: dangling pose id {node['pose']!r}")
                if node.get("skill") == "execute_trajectory" \
                        and node["trajectory"] not in registry.trajectories:
                    raise ConfigParseError(f"{where}: dangling trajectory id {node['trajectory']!r}")
        for i, child in enumerate(node.get("children", [])):
            walk(child, f"{where}.children[{i}]")

    for tree_id, tree in config.trees.items():
        walk(tree, f"trees.{tree_id}")
    for gesture, tree_id in config.bindings.items():
        if tree_id not in config.trees:
            raise ConfigParseError(f"binding {gesture.canonical_name!r}: dangling tree id {tree_id!r}")


def load_bindings(config_text: str, registry: PoseRegistry | None = None) -> BTConfig:
    """Parse a tree/binding config; every referenced id must resolve."""
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(
            f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    trees = doc.get("trees", {})
    bindings = {}
    for name, tree_id in doc.get("bindings", {}).items():
        bindings[GestureClass.from_name(name)] = tree_id
    estop = doc.get("estop_gesture")
    config = BTConfig(
        trees=trees,
        bindings=bindings,
        estop_gesture=GestureClass.from_name(estop) if estop else None,
    )
    # Instantiate everything once so structural errors surface at load.
    for tree_id in trees:
        config.instantiate(tree_id)
    _validate_ids(config, registry)
    return config


PRESET_NAMES = ("test1_pick_place", "test3_pour", "test4_estop", "test5_guide_velocity")

PRESET_ALIASES = {
    "test1": "test1_pick_place",
    "test2": "test1_pick_place",  # same bindings; the environment differs
    "test3": "test3_pour",
    "test4": "test4_estop",
    "test5": "test5_guide_velocity",
}


def load_preset(name: str, registry: PoseRegistry | None = None) -> BTConfig:
    name = PRESET_ALIASES.get(name, name)
    if name not in PRESET_NAMES:
        raise KeyError(f"unknown preset {name!r}; available: {PRESET_NAMES}")
    text = resources.files("gesturecell.presets").joinpath(f"{name}.json").read_text()
    return load_bindings(text, registry)


# -- engine ------------------------------------------------------------------

class DispatchResult(Enum):
    LAUNCHED = "launched"
    REJECTED_BUSY = "rejected_busy"
    IGNORED_CONFIDENCE = "ignored_confidence"
    UNBOUND = "unbound"
    ESTOP = "estop"


@dataclass
class BTStatusEvent:
    tree_id: str
    node_path: str
    status: TickStatus


class BTEngine:
    """Owns the running tree; gestures arrive via on_gesture, time via tick()
    at the engine rate (default 20 Hz in the gateway loop)."""

    def __init__(self, world: World, config: BTConfig, confidence_threshold: float = 0.8):
        self.world = world
        self.config = config
        self.confidence_threshold = confidence_threshold
        self.current_tree_id: str | None = None
        self.current_node: BTNode | None = None
        self.last_event: BTStatusEvent | None = None
        self.completed: list[tuple[str, TickStatus]] = []

    @property
    def busy(self) -> bool:
        return self.current_node is not None

    def load_config(self, config: BTConfig) -> None:
        self.abort()
        self.config = config

    def abort(self) -> None:
        """Abandon the running tree, leaving the robot commanded to stop."""
        if self.current_node is not None:
            self.world.sim.emergency_stop()
            self.completed.append((self.current_tree_id, TickStatus.FAILURE))
            self.last_event = BTStatusEvent(self.current_tree_id, "aborted", TickStatus.FAILURE)
        self.current_tree_id = None
        self.current_node = None

    def on_gesture(self, gesture: GestureClass, confidence: float) -> DispatchResult:
        if confidence < self.confidence_threshold:
            log.debug("gesture %s below confidence threshold (%.2f)", gesture, confidence)
            return DispatchResult.IGNORED_CONFIDENCE
        if self.config.estop_gesture is not None and gesture is self.config.estop_gesture:
            was_busy = self.busy
            self.abort()
            self.world.sim.emergency_stop()
            if not was_busy:
                self.last_event = BTStatusEvent("estop", "emergency_stop", TickStatus.SUCCESS)
            return DispatchResult.ESTOP
        if self.busy:
            log.info("gesture %s rejected: tree %s still running",
                     gesture.canonical_name, self.current_tree_id)
            return DispatchResult.REJECTED_BUSY
        tree_id = self.config.bindings.get(gesture)
        if tree_id is None:
            log.info("gesture %s has no binding", gesture.canonical_name)
            return DispatchResult.UNBOUND
        self.current_tree_id = tree_id
        self.current_node = self.config.instantiate(tree_id)
        return DispatchResult.LAUNCHED

    def tick(self) -> BTStatusEvent | None:
        """One engine tick of the current tree, if any."""
        if self.current_node is None:
            return None
        status = self.current_node.tick(self.world)
        path = self.current_node.active_path() if status is TickStatus.RUNNING \
            else self.current_node.label()
        event = BTStatusEvent(self.current_tree_id, path, status)
        self.last_event = event
        if status is not TickStatus.RUNNING:
            self.completed.append((self.current_tree_id, status))
            self.current_tree_id = None
            self.current_node = None
        return event
