"""Synthetic radar scenes: parametric hand-gesture trajectories, a point-target
FMCW beat-signal model, and the three capture environments (clean hand, hand
plus human, hand plus human with a robot arm behind).

The hand is modeled as a small cluster of point scatterers jittered in position
and velocity around the trajectory centroid; the velocity jitter stands in for
wrist/finger motion and keeps some scatterer energy outside the static-clutter
notch even when the centroid moves purely tangentially.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .radar import C_LIGHT, RadarConfig, RadarCube


@dataclass(frozen=True)
class Scatterer:
    """Point target: position/velocity in the radar plane, linear reflectivity."""

    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if self.y <= 0.0:
            raise ValueError("scatterer must be in front of the radar (y > 0)")
        if not math.isfinite(self.amplitude) or self.amplitude < 0.0:
            raise ValueError("amplitude must be finite and >= 0")


class GestureClass(Enum):
    SWIPE_LEFT = 0
    SWIPE_RIGHT = 1
    UP = 2
    DOWN = 3
    SWIPE_CW = 4
    SWIPE_CCW = 5
    S = 6
    Z = 7
    X = 8

    @property
    def canonical_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "GestureClass":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown gesture class {name!r}") from None


GESTURE_NAMES = tuple(g.canonical_name for g in GestureClass)


@dataclass(frozen=True)
class SpeedProfile:
    """Monotone map of normalized time to normalized arc position, with its
    analytic slope so trajectory velocities stay exact."""

    value: Callable[[float], float]
    slope: Callable[[float], float]


IDENTITY_PROFILE = SpeedProfile(value=lambda u: u, slope=lambda u: 1.0)
SMOOTHSTEP_PROFILE = SpeedProfile(
    value=lambda u: u * u * (3.0 - 2.0 * u),
    slope=lambda u: 6.0 * u * (1.0 - u),
)


@dataclass(frozen=True)
class GestureScript:
    gesture: GestureClass
    duration: float = 1.0          # s
    extent: float = 0.2            # m, trajectory bounding size
    center: tuple[float, float] = (0.0, 0.35)  # m
    jitter: float = 0.015          # m std-dev per waypoint
    speed_profile: SpeedProfile = IDENTITY_PROFILE

    def __post_init__(self) -> None:
        if not 0.5 <= self.duration <= 2.5:
            raise ValueError("duration must be in [0.5, 2.5] s")
        if not 0.05 < self.extent < 0.5:
            raise ValueError("extent must be in (0.05, 0.5) m")


# Letter strokes as unit-box polylines ([-0.5, 0.5]^2, x lateral / y radial),
# drawn as one continuous hand path.
_LETTER_POINTS = {
    GestureClass.S: [(0.4, 0.5), (-0.4, 0.5), (-0.4, 0.0), (0.4, 0.0), (0.4, -0.5), (-0.4, -0.5)],
    GestureClass.Z: [(-0.4, 0.5), (0.4, 0.5), (-0.4, -0.5), (0.4, -0.5)],
    GestureClass.X: [(-0.4, 0.5), (0.4, -0.5), (0.4, 0.5), (-0.4, -0.5)],
}

# Fraction of extent by which swipes bow radially; keeps the radial velocity
# from vanishing across the whole stroke.
_SWIPE_BOW = 0.15


def _polyline_eval(points: list[tuple[float, float]], u: float) -> tuple[np.ndarray, np.ndarray]:
    """Constant-speed traversal of a polyline; returns (pos, dpos/du)."""
    pts = np.asarray(points, dtype=np.float64)
    seg = np.diff(pts, axis=0)
    lengths = np.hypot(seg[:, 0], seg[:, 1])
    total = lengths.sum()
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    s = u * total
    i = min(int(np.searchsorted(cum, s, side="right")) - 1, len(seg) - 1)
    i = max(i, 0)
    frac = 0.0 if lengths[i] == 0.0 else (s - cum[i]) / lengths[i]
    pos = pts[i] + frac * seg[i]
    dpos_du = seg[i] / lengths[i] * total
    return pos, dpos_du


def _unit_curve(gesture: GestureClass, u: float) -> tuple[np.ndarray, np.ndarray]:
    """Unit-extent curve for a gesture class; returns (pos, dpos/du) before
    centering. Bounding size is 1 along the dominant axis."""
    if gesture in (GestureClass.SWIPE_LEFT, GestureClass.SWIPE_RIGHT):
        sign = 1.0 if gesture is GestureClass.SWIPE_RIGHT else -1.0
        x = sign * (u - 0.5)
        y = -_SWIPE_BOW * math.sin(2.0 * math.pi * u)
        dx = sign
        dy = -_SWIPE_BOW * 2.0 * math.pi * math.cos(2.0 * math.pi * u)
        return np.array([x, y]), np.array([dx, dy])
    if gesture in (GestureClass.UP, GestureClass.DOWN):
        # Up approaches the radar (y decreasing), Down retreats.
        sign = -1.0 if gesture is GestureClass.UP else 1.0
        return np.array([0.0, sign * (u - 0.5)]), np.array([0.0, sign])
    if gesture in (GestureClass.SWIPE_CW, GestureClass.SWIPE_CCW):
        # Closed circle of diameter 1 starting at the top; CW runs clockwise
        # (negative signed area in the x-y plane).
        orient = -1.0 if gesture is GestureClass.SWIPE_CW else 1.0
        phi = 0.5 * math.pi + orient * 2.0 * math.pi * u
        r = 0.5
        pos = np.array([r * math.cos(phi), r * math.sin(phi)])
        dpos = np.array([-r * math.sin(phi), r * math.cos(phi)]) * orient * 2.0 * math.pi
        return pos, dpos
    return _polyline_eval(_LETTER_POINTS[gesture], u)


def gesture_trajectory(script: GestureScript, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Centroid position and velocity of the hand at time t in [0, duration]."""
    if not 0.0 <= t <= script.duration:
        raise ValueError(f"t={t} outside [0, {script.duration}]")
    tau = t / script.duration
    u = min(max(script.speed_profile.value(tau), 0.0), 1.0)
    pos, dpos_du = _unit_curve(script.gesture, u)
    position = np.array(script.center) + script.extent * pos
    velocity = script.extent * dpos_du * script.speed_profile.slope(tau) / script.duration
    return position, velocity


def synth_cube(
    scatterers: list[Scatterer],
    config: RadarConfig,
    noise_std: float = 0.0,
    rng: np.random.Generator | int | None = None,
) -> RadarCube:
    """Superimpose point-target beat signals into one radar cube.

    Each scatterer contributes A * exp(j*2*pi*(f_b*n/fs + f_d*m*T_c + k*d*sin(theta)))
    with beat frequency f_b = 2*slope*r/c, Doppler f_d = 2*v_radial/lambda
    (approaching positive), and channel pitch d in wavelengths. Received
    amplitude falls off as reflectivity / r^2 (two-way spreading), so near
    hands dominate far clutter. Circular complex noise of the given std is
    added; deterministic for a given rng seed.
    """
    cfg = config
    if scatterers:
        pos = np.array([(sc.x, sc.y) for sc in scatterers])
        vel = np.array([(sc.vx, sc.vy) for sc in scatterers])
        r = np.hypot(pos[:, 0], pos[:, 1])
        amp = np.array([sc.amplitude for sc in scatterers]) / r**2
        v_radial = -(pos[:, 0] * vel[:, 0] + pos[:, 1] * vel[:, 1]) / r
        sin_theta = pos[:, 0] / r
        f_beat = 2.0 * cfg.chirp_slope * r / C_LIGHT
        f_doppler = 2.0 * v_radial / cfg.wavelength

        n = np.arange(cfg.n_samples)
        m = np.arange(cfg.n_chirps)
        k = np.arange(cfg.n_channels)
        phase_n = np.exp(2j * np.pi * np.outer(f_beat / cfg.sample_rate, n))    # [T, n]
        phase_m = np.exp(2j * np.pi * np.outer(f_doppler * cfg.chirp_period, m))  # [T, m]
        phase_k = np.exp(2j * np.pi * np.outer(sin_theta * cfg.antenna_spacing, k))  # [T, k]
        per_target_nm = (amp[:, None] * phase_n)[:, :, None] * phase_m[:, None, :]
        data = np.tensordot(per_target_nm, phase_k, axes=([0], [0]))
    else:
        data = np.zeros((cfg.n_samples, cfg.n_chirps, cfg.n_channels), dtype=np.complex128)
    if noise_std > 0.0:
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        noise = gen.standard_normal(data.shape) + 1j * gen.standard_normal(data.shape)
        data += noise * (noise_std / math.sqrt(2.0))
    return RadarCube(data=data, config=cfg)


class EnvironmentKind(Enum):
    HAND_ONLY = "hand_only"
    HAND_PLUS_HUMAN = "hand_plus_human"
    HAND_HUMAN_ARM_BEHIND = "hand_human_arm_behind"


@dataclass(frozen=True)
class EnvironmentProfile:
    kind: EnvironmentKind
    static_clutter: tuple[Scatterer, ...] = ()
    interferer_amplitude: float = 0.0
    interferer_start: tuple[float, float] = (0.15, 0.9)
    interferer_motion_std: float = 0.0   # burst velocity std, m/s
    interferer_burst_rate: float = 0.0   # per-frame probability of a motion burst
    noise_std: float = 0.005

    def __post_init__(self) -> None:
        if self.kind is EnvironmentKind.HAND_ONLY and self.interferer_amplitude != 0.0:
            raise ValueError("HAND_ONLY environment cannot have an interferer")


def environment(kind: EnvironmentKind) -> EnvironmentProfile:
    """Default profile per capture condition."""
    if kind is EnvironmentKind.HAND_ONLY:
        return EnvironmentProfile(kind=kind)
    # Reflectivities are sized so that after the 1/r^2 rolloff a human torso
    # or a robot arm still clearly outshines the noise floor while staying an
    # order of magnitude below the near hand.
    torso = (
        Scatterer(x=0.10, y=0.90, amplitude=4.0),
        Scatterer(x=-0.08, y=0.95, amplitude=3.0),
        Scatterer(x=0.02, y=1.00, amplitude=2.5),
    )
    if kind is EnvironmentKind.HAND_PLUS_HUMAN:
        return EnvironmentProfile(
            kind=kind,
            static_clutter=torso,
            interferer_amplitude=2.0,
            interferer_start=(0.15, 0.9),
            interferer_motion_std=0.25,
            interferer_burst_rate=0.04,
            noise_std=0.01,
        )
    arm = (
        Scatterer(x=-0.20, y=1.25, amplitude=5.0),
        Scatterer(x=0.25, y=1.30, amplitude=4.0),
    )
    return EnvironmentProfile(
        kind=kind,
        static_clutter=torso + arm,
        interferer_amplitude=2.5,
        interferer_start=(-0.1, 1.2),
        interferer_motion_std=0.30,
        interferer_burst_rate=0.05,
        noise_std=0.015,
    )


# Std-dev of per-scatterer velocity jitter around the centroid velocity (m/s).
HAND_VELOCITY_JITTER = 0.12

MAX_SEQUENCE_FRAMES = 50


class InterfererWalk:
    """Nearby-human scatterer; one instance persists across frames so gesture
    and idle periods stay coherent. A standing person is exactly static most
    frames (fully cancelled by the zero-Doppler notch) with occasional one-
    or two-frame motion bursts: visible interference during gestures, but too
    short to look like the consecutive active frames a gesture start needs."""

    def __init__(self, env: EnvironmentProfile, rng: np.random.Generator):
        self.env = env
        self.rng = rng
        self.pos = np.array(env.interferer_start, dtype=np.float64)
        self.vel = np.zeros(2)
        self.burst_left = 0

    def step(self, frame_period: float) -> Scatterer | None:
        if self.env.interferer_amplitude <= 0.0:
            return None
        if self.burst_left == 0:
            self.vel = np.zeros(2)
            if self.rng.random() < self.env.interferer_burst_rate:
                self.burst_left = int(self.rng.integers(1, 3))
                self.vel = self.rng.normal(0.0, self.env.interferer_motion_std, size=2)
        if self.burst_left > 0:
            self.burst_left -= 1
        self.pos = self.pos + self.vel * frame_period
        return Scatterer(
            x=float(self.pos[0]), y=float(max(self.pos[1], 0.1)),
            vx=float(self.vel[0]), vy=float(self.vel[1]),
            amplitude=self.env.interferer_amplitude,
        )


def synth_idle_cube(
    env: EnvironmentProfile,
    config: RadarConfig,
    noise_rng: np.random.Generator,
    interferer: InterfererWalk | None = None,
) -> RadarCube:
    """One frame of the environment with no hand present."""
    scatterers = list(env.static_clutter)
    if interferer is not None:
        walker = interferer.step(config.frame_period)
        if walker is not None:
            scatterers.append(walker)
    return synth_cube(scatterers, config, noise_std=env.noise_std, rng=noise_rng)


def synth_gesture_sequence(
    script: GestureScript,
    env: EnvironmentProfile,
    config: RadarConfig,
    seed: int | np.random.SeedSequence = 0,
    lead_frames: int = 0,
    tail_frames: int = 0,
) -> list[RadarCube]:
    """One radar cube per frame for a scripted gesture in an environment.

    The hand is 3-5 scatterers with fixed base offsets (hand geometry) plus
    per-frame positional tremor and velocity jitter; the interferer is a
    slow random-walk scatterer. Optional lead/tail frames extend the capture
    with hand-free environment frames (same clutter, interferer, and noise
    streams), matching what a live session records around a gesture.
    Deterministic for a given seed.
    """
    n_gesture = math.ceil(script.duration / config.frame_period)
    if n_gesture > MAX_SEQUENCE_FRAMES:
        raise ValueError(
            f"{n_gesture} frames exceeds the {MAX_SEQUENCE_FRAMES}-frame buffer; "
            "shorten duration or slow the frame rate"
        )
    if lead_frames < 0 or tail_frames < 0:
        raise ValueError("lead_frames and tail_frames must be >= 0")
    # Separate streams so the hand cluster is identical across environments
    # for the same seed (environment comparisons stay paired).
    hand_rng, env_rng, noise_rng = np.random.default_rng(seed).spawn(3)
    n_hand = int(hand_rng.integers(3, 6))
    base_offsets = hand_rng.normal(0.0, script.jitter, size=(n_hand, 2))
    amplitudes = hand_rng.uniform(0.7, 1.3, size=n_hand)
    interferer = InterfererWalk(env, env_rng)

    cubes: list[RadarCube] = []
    for f in range(lead_frames + n_gesture + tail_frames):
        scatterers: list[Scatterer] = []
        if lead_frames <= f < lead_frames + n_gesture:
            t = min((f - lead_frames + 0.5) * config.frame_period, script.duration)
            centroid, vel = gesture_trajectory(script, t)
            tremor = hand_rng.normal(0.0, script.jitter * 0.5, size=(n_hand, 2))
            vel_jitter = hand_rng.normal(0.0, HAND_VELOCITY_JITTER, size=(n_hand, 2))
            for i in range(n_hand):
                px, py = centroid + base_offsets[i] + tremor[i]
                scatterers.append(Scatterer(
                    x=float(px), y=float(max(py, 0.05)),
                    vx=float(vel[0] + vel_jitter[i, 0]),
                    vy=float(vel[1] + vel_jitter[i, 1]),
                    amplitude=float(amplitudes[i]),
                ))
        scatterers.extend(env.static_clutter)
        walker = interferer.step(config.frame_period)
        if walker is not None:
            scatterers.append(walker)
        cubes.append(synth_cube(scatterers, config, noise_std=env.noise_std, rng=noise_rng))
    return cubes
