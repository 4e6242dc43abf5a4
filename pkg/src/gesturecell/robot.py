"""Kinematic simulation of a 6-DoF arm riding a linear guide.

The plant is purely kinematic: seven axes (prismatic rail + six revolute
joints) plus a gripper aperture. Motion comes from sampled trapezoidal
trajectories played back under a speed scale in [0, 1] that dilates
trajectory time (0 = full stop, 1 = nominal), from a raised-cosine guide
velocity controller, and from a fixed-rate gripper slew. The effective speed
scale is the product of the operator override, the human-proximity scale,
and the emergency-stop ramp.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

N_AXES = 7  # rail + 6 joints

# Defaults used by the skill layer; per-axis limits.
DEFAULT_V_MAX = np.array([0.5, 1.5, 1.5, 1.5, 2.0, 2.0, 2.0])
DEFAULT_A_MAX = np.array([1.0, 3.0, 3.0, 3.0, 4.0, 4.0, 4.0])
GRIPPER_RATE = 2.0          # aperture fraction per second
ESTOP_RAMP_TIME = 0.2       # s, linear ramp to zero speed scale
TRAJECTORY_SAMPLE_DT = 0.01  # s


class PlanningError(ValueError):
    """Target outside limits or otherwise unplannable."""


@dataclass(frozen=True)
class JointLimits:
    rail_length: float = 1.0
    joint_min: float = -2.0 * math.pi
    joint_max: float = 2.0 * math.pi

    def clamp(self, q: np.ndarray) -> np.ndarray:
        out = q.copy()
        out[0] = min(max(out[0], 0.0), self.rail_length)
        out[1:] = np.clip(out[1:], self.joint_min, self.joint_max)
        return out

    def inside(self, q: np.ndarray) -> bool:
        return (0.0 <= q[0] <= self.rail_length
                and bool(np.all(q[1:] >= self.joint_min))
                and bool(np.all(q[1:] <= self.joint_max)))


@dataclass(frozen=True)
class RobotState:
    """Immutable snapshot published to observers."""

    guide_pos: float
    joints: tuple[float, ...]
    gripper: float
    speed_scale: float
    sim_time: float
    estopped: bool
    trajectory_active: bool
    guide_velocity_active: bool

    @property
    def q(self) -> np.ndarray:
        return np.array([self.guide_pos, *self.joints])


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped waypoints over all seven axes with cubic interpolation."""

    times: np.ndarray      # strictly increasing, starts at 0
    values: np.ndarray     # [n, 7]

    def __post_init__(self) -> None:
        if len(self.times) != len(self.values):
            raise ValueError("times and values must align")
        if len(self.times) == 0:
            raise ValueError("empty trajectory")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("waypoint times must be strictly increasing")

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def sample(self, t: float) -> np.ndarray:
        """Cubic Hermite (Catmull-Rom tangents) through the waypoints."""
        times, values = self.times, self.values
        if len(times) == 1 or t <= times[0]:
            return values[0].copy() if t <= times[0] else values[-1].copy()
        if t >= times[-1]:
            return values[-1].copy()
        k = int(np.searchsorted(times, t, side="right")) - 1
        t0, t1 = times[k], times[k + 1]
        h = t1 - t0
        s = (t - t0) / h

        def tangent(i: int) -> np.ndarray:
            lo = max(i - 1, 0)
            hi = min(i + 1, len(times) - 1)
            return (values[hi] - values[lo]) / (times[hi] - times[lo])

        m0, m1 = tangent(k) * h, tangent(k + 1) * h
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return h00 * values[k] + h10 * m0 + h01 * values[k + 1] + h11 * m1


def _trapezoid_position(dist: float, v_peak: float, accel: float, duration: float, t: float) -> float:
    """Distance covered at time t of a trapezoidal (or triangular) profile."""
    if dist == 0.0 or duration == 0.0:
        return 0.0
    t = min(max(t, 0.0), duration)
    t_acc = v_peak / accel
    if t <= t_acc:
        return 0.5 * accel * t * t
    if t <= duration - t_acc:
        return 0.5 * accel * t_acc**2 + v_peak * (t - t_acc)
    tail = duration - t
    return dist - 0.5 * accel * tail * tail


def plan_trajectory(
    start: np.ndarray,
    target: np.ndarray,
    v_max: np.ndarray | float = DEFAULT_V_MAX,
    a_max: np.ndarray | float = DEFAULT_A_MAX,
    limits: JointLimits = JointLimits(),
) -> Trajectory:
    """Synchronized trapezoidal profiles: the slowest axis sets the duration
    and every other axis stretches its cruise phase to match, so all axes
    start and stop together without exceeding their limits."""
    start = np.asarray(start, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if start.shape != (N_AXES,) or target.shape != (N_AXES,):
        raise PlanningError(f"start/target must have {N_AXES} axes")
    if not limits.inside(target):
        raise PlanningError(f"target {target} outside limits")
    v_max = np.broadcast_to(np.asarray(v_max, dtype=np.float64), (N_AXES,))
    a_max = np.broadcast_to(np.asarray(a_max, dtype=np.float64), (N_AXES,))
    if np.any(v_max <= 0.0) or np.any(a_max <= 0.0):
        raise PlanningError("v_max and a_max must be positive")

    delta = target - start
    dist = np.abs(delta)
    # Per-axis minimal time: trapezoid if it can reach v_max, else triangle.
    t_axis = np.zeros(N_AXES)
    for i in range(N_AXES):
        if dist[i] == 0.0:
            continue
        if dist[i] >= v_max[i] ** 2 / a_max[i]:
            t_axis[i] = dist[i] / v_max[i] + v_max[i] / a_max[i]
        else:
            t_axis[i] = 2.0 * math.sqrt(dist[i] / a_max[i])
    duration = float(t_axis.max())
    if duration == 0.0:
        return Trajectory(times=np.array([0.0]), values=start[None, :].copy())

    # Peak velocity per axis for the common duration (accel kept at a_max):
    # solves duration = dist/v + v/a, taking the physical (smaller) root.
    v_peak = np.zeros(N_AXES)
    for i in range(N_AXES):
        if dist[i] == 0.0:
            continue
        disc = (a_max[i] * duration) ** 2 - 4.0 * a_max[i] * dist[i]
        disc = max(disc, 0.0)
        v_peak[i] = (a_max[i] * duration - math.sqrt(disc)) / 2.0

    n_steps = int(math.ceil(duration / TRAJECTORY_SAMPLE_DT))
    times = np.minimum(np.arange(n_steps + 1) * TRAJECTORY_SAMPLE_DT, duration)
    if times[-1] < duration:
        times = np.append(times, duration)
    values = np.empty((len(times), N_AXES))
    sign = np.sign(delta)
    for j, t in enumerate(times):
        for i in range(N_AXES):
            values[j, i] = start[i] + sign[i] * _trapezoid_position(
                dist[i], v_peak[i], a_max[i], duration, float(t)
            )
    values[-1] = target
    return Trajectory(times=times, values=values)


@dataclass
class GuideVelocityState:
    """Raised-cosine decay of the commanded guide velocity after a trigger."""

    v_nom: float = 0.0
    decay_time: float = 1.0     # T: time to reach zero after the trigger
    t_since_trigger: float = 0.0

    def __post_init__(self) -> None:
        if self.decay_time <= 0.0:
            raise ValueError("decay time must be positive")
        if self.t_since_trigger < 0.0:
            raise ValueError("t_since_trigger must be >= 0")


def guide_velocity(gvs: GuideVelocityState, t: float | None = None) -> float:
    """v(t) = v_nom * 0.5 * (1 + cos(pi * min(t, T) / T)); exactly zero at and
    beyond t = T."""
    t = gvs.t_since_trigger if t is None else t
    lam = 0.5 * (1.0 + math.cos(math.pi * min(t, gvs.decay_time) / gvs.decay_time))
    return gvs.v_nom * lam


def retrigger_guide(
    gvs: GuideVelocityState,
    v_nom_by_class: dict,
    gesture,
) -> GuideVelocityState:
    """New nominal velocity for the gesture and the decay clock reset to zero.
    Unbound gestures leave the state unchanged."""
    if gesture not in v_nom_by_class:
        return gvs
    return GuideVelocityState(
        v_nom=float(v_nom_by_class[gesture]),
        decay_time=gvs.decay_time,
        t_since_trigger=0.0,
    )


@dataclass(frozen=True)
class ProximityModel:
    human_distance: float = 10.0
    d_stop: float = 0.3
    d_full: float = 1.2

    def __post_init__(self) -> None:
        if not 0.0 < self.d_stop < self.d_full:
            raise ValueError("need 0 < d_stop < d_full")


def proximity_scale(model: ProximityModel) -> float:
    """0 at or inside d_stop, 1 at or beyond d_full, linear between."""
    d = model.human_distance
    if d <= model.d_stop:
        return 0.0
    if d >= model.d_full:
        return 1.0
    return (d - model.d_stop) / (model.d_full - model.d_stop)


# ---------------------------------------------------------------------------
# Forward kinematics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DhRow:
    a: float
    d: float
    alpha: float


# Standard UR5 Denavit-Hartenberg table (meters, radians).
UR5_DH = (
    DhRow(a=0.0, d=0.089159, alpha=math.pi / 2),
    DhRow(a=-0.425, d=0.0, alpha=0.0),
    DhRow(a=-0.39225, d=0.0, alpha=0.0),
    DhRow(a=0.0, d=0.10915, alpha=math.pi / 2),
    DhRow(a=0.0, d=0.09465, alpha=-math.pi / 2),
    DhRow(a=0.0, d=0.0823, alpha=0.0),
)

RAIL_AXIS = np.array([1.0, 0.0, 0.0])


def dh_transform(row: DhRow, theta: float) -> np.ndarray:
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(row.alpha), math.sin(row.alpha)
    return np.array([
        [ct, -st * ca, st * sa, row.a * ct],
        [st, ct * ca, -ct * sa, row.a * st],
        [0.0, sa, ca, row.d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def rotation_to_quaternion(r: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) from a rotation matrix."""
    trace = r[0, 0] + r[1, 1] + r[2, 2]
    if trace > 0.0:
        s = math.sqrt(trace + 1.0) * 2.0
        q = np.array([0.25 * s, (r[2, 1] - r[1, 2]) / s,
                      (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s])
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array([(r[2, 1] - r[1, 2]) / s, 0.25 * s,
                      (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s])
    elif r[1, 1] > r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array([(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s,
                      0.25 * s, (r[1, 2] + r[2, 1]) / s])
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array([(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s,
                      (r[1, 2] + r[2, 1]) / s, 0.25 * s])
    return q / np.linalg.norm(q)


def forward_kinematics(
    q: np.ndarray,
    dh: tuple[DhRow, ...] = UR5_DH,
    rail_axis: np.ndarray = RAIL_AXIS,
) -> tuple[np.ndarray, np.ndarray]:
    """End-effector (position, unit quaternion) for [guide, joints...]."""
    t = np.eye(4)
    t[:3, 3] = rail_axis * q[0]
    for row, theta in zip(dh, q[1:]):
        t = t @ dh_transform(row, float(theta))
    return t[:3, 3].copy(), rotation_to_quaternion(t[:3, :3])


def joint_frames(q: np.ndarray, dh: tuple[DhRow, ...] = UR5_DH,
                 rail_axis: np.ndarray = RAIL_AXIS) -> np.ndarray:
    """Positions of the base and each joint origin; for schematic rendering."""
    t = np.eye(4)
    t[:3, 3] = rail_axis * q[0]
    points = [t[:3, 3].copy()]
    for row, theta in zip(dh, q[1:]):
        t = t @ dh_transform(row, float(theta))
        points.append(t[:3, 3].copy())
    return np.array(points)


# ---------------------------------------------------------------------------
# Simulator
# ---------------------------------------------------------------------------

class RobotSim:
    """Owns the plant state; advanced by fixed-rate step() calls. Commands
    mutate targets only; all motion happens in step()."""

    def __init__(self, initial_q: np.ndarray | None = None,
                 limits: JointLimits | None = None):
        self.limits = limits or JointLimits()
        q = np.zeros(N_AXES) if initial_q is None else np.asarray(initial_q, dtype=np.float64)
        if not self.limits.inside(q):
            raise PlanningError("initial configuration outside limits")
        self._q = q.copy()
        self._gripper = 1.0
        self._gripper_target = 1.0
        self._sim_time = 0.0
        self._trajectory: Trajectory | None = None
        self._phase = 0.0
        self._guide: GuideVelocityState | None = None
        self._estopped = False
        self._estop_scale = 1.0
        self._override = 1.0
        self._proximity = ProximityModel()
        self.limit_violations = 0

    # -- commands ----------------------------------------------------------

    def command_trajectory(self, trajectory: Trajectory) -> None:
        self._trajectory = trajectory
        self._phase = 0.0
        self._guide = None

    def move_to(self, target: np.ndarray, speed_fraction: float = 1.0) -> None:
        if not 0.0 < speed_fraction <= 1.0:
            raise PlanningError("speed fraction must be in (0, 1]")
        traj = plan_trajectory(self._q, target, DEFAULT_V_MAX * speed_fraction,
                               DEFAULT_A_MAX, self.limits)
        self.command_trajectory(traj)

    def command_gripper(self, aperture: float) -> None:
        self._gripper_target = min(max(float(aperture), 0.0), 1.0)

    def command_guide_velocity(self, gvs: GuideVelocityState) -> None:
        self._guide = gvs
        self._trajectory = None

    def retrigger_guide(self, v_nom_by_class: dict, gesture) -> None:
        current = self._guide or GuideVelocityState()
        updated = retrigger_guide(current, v_nom_by_class, gesture)
        if updated is not current:
            self._guide = updated
            self._trajectory = None

    def emergency_stop(self) -> None:
        self._estopped = True

    def release_estop(self) -> None:
        self._estopped = False
        self._estop_scale = 1.0

    def set_human_distance(self, distance: float) -> None:
        self._proximity = replace(self._proximity, human_distance=float(distance))

    def set_speed_override(self, fraction: float) -> None:
        self._override = min(max(float(fraction), 0.0), 1.0)

    # -- state -------------------------------------------------------------

    @property
    def speed_scale(self) -> float:
        return self._estop_scale * proximity_scale(self._proximity) * self._override

    def current_guide_velocity(self) -> float:
        """Commanded rail velocity right now (before speed scaling)."""
        if self._guide is None:
            return 0.0
        return guide_velocity(self._guide)

    def trajectory_done(self) -> bool:
        return self._trajectory is None

    def snapshot(self) -> RobotState:
        return RobotState(
            guide_pos=float(self._q[0]),
            joints=tuple(float(v) for v in self._q[1:]),
            gripper=float(self._gripper),
            speed_scale=float(self.speed_scale),
            sim_time=float(self._sim_time),
            estopped=self._estopped,
            trajectory_active=self._trajectory is not None,
            guide_velocity_active=self._guide is not None,
        )

    def end_effector(self) -> tuple[np.ndarray, np.ndarray]:
        return forward_kinematics(self._q)

    # -- dynamics ----------------------------------------------------------

    def step(self, dt: float) -> RobotState:
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        if self._estopped and self._estop_scale > 0.0:
            self._estop_scale = max(0.0, self._estop_scale - dt / ESTOP_RAMP_TIME)
        scale = self.speed_scale

        if self._trajectory is not None and scale > 0.0:
            self._phase += dt * scale
            q = self._trajectory.sample(self._phase)
            clamped = self.limits.clamp(q)
            if not np.array_equal(clamped, q):
                self.limit_violations += 1
            self._q = clamped
            if self._phase >= self._trajectory.duration:
                self._q = self.limits.clamp(self._trajectory.values[-1])
                self._trajectory = None
        elif self._guide is not None:
            gvs = self._guide
            v0 = guide_velocity(gvs, gvs.t_since_trigger)
            v1 = guide_velocity(gvs, gvs.t_since_trigger + dt)
            new_pos = self._q[0] + scale * 0.5 * (v0 + v1) * dt
            limited = min(max(new_pos, 0.0), self.limits.rail_length)
            if limited != new_pos:
                self.limit_violations += 1
            self._q[0] = limited
            gvs.t_since_trigger += dt

        if self._gripper != self._gripper_target and scale > 0.0:
            max_step = GRIPPER_RATE * dt * scale
            delta = self._gripper_target - self._gripper
            self._gripper += min(max(delta, -max_step), max_step)

        self._sim_time += dt
        return self.snapshot()


# ---------------------------------------------------------------------------
# Named poses and precomputed trajectories (structured config files)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoseRegistry:
    poses: dict[str, np.ndarray]
    trajectories: dict[str, tuple[np.ndarray, np.ndarray]]  # times, offsets

    def pose(self, name: str) -> np.ndarray:
        if name not in self.poses:
            raise KeyError(f"unknown pose {name!r}")
        return self.poses[name].copy()

    def rebased_trajectory(self, name: str, start: np.ndarray) -> Trajectory:
        """Precomputed trajectories are stored as offsets and rebased to the
        current configuration so they always start where the robot is."""
        if name not in self.trajectories:
            raise KeyError(f"unknown trajectory {name!r}")
        times, offsets = self.trajectories[name]
        return Trajectory(times=times.copy(), values=start[None, :] + offsets)


def load_pose_registry(path: str | Path | None = None) -> PoseRegistry:
    if path is None:
        source = resources.files("gesturecell.presets").joinpath("poses.json")
        doc = json.loads(source.read_text())
    else:
        with open(path) as fh:
            doc = json.load(fh)
    poses = {
        name: np.array([entry["guide"], *entry["joints"]], dtype=np.float64)
        for name, entry in doc["poses"].items()
    }
    for name, q in poses.items():
        if len(q) != N_AXES:
            raise ValueError(f"pose {name!r} must have guide + 6 joints")
    trajectories = {}
    for name, entry in doc.get("trajectories", {}).items():
        times = np.asarray(entry["times"], dtype=np.float64)
        offsets = np.asarray(entry["offsets"], dtype=np.float64)
        if offsets.shape != (len(times), N_AXES):
            raise ValueError(f"trajectory {name!r} offsets must be [n, {N_AXES}]")
        trajectories[name] = (times, offsets)
    return PoseRegistry(poses=poses, trajectories=trajectories)
