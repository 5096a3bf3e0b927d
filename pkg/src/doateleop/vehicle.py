"""Omnidirectional UGV kinematics with camera-frame (free-look) commands.

Frame convention, used project-wide: body x points right (starboard), body y
points forward; heading 0 aligns the body axes with the world axes and a
positive heading rotates them counterclockwise. Commands are expressed in the
camera frame (body frame rotated by camera_yaw); while the platform moves,
the chassis slews toward the camera direction so the camera's world direction
is preserved, which is the free-look behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .field import WallSegment
from .geometry import Point, rotate, segment_hit_param, wrap_angle

# Back-off from a wall at contact so the next sweep does not start on it.
_CONTACT_EPS = 1e-6


@dataclass(frozen=True)
class VehicleLimits:
    v_max: float = 0.5
    camera_yaw_rate_max: float = 1.5
    heading_slew_rate: float = 1.5


@dataclass(frozen=True)
class FlcCommand:
    """Velocity setpoint in the camera frame plus camera yaw rate."""

    v_forward: float = 0.0
    v_lateral: float = 0.0
    camera_yaw_rate: float = 0.0

    def clamped(self, limits: VehicleLimits) -> "FlcCommand":
        vf = min(max(self.v_forward, -limits.v_max), limits.v_max)
        vl = min(max(self.v_lateral, -limits.v_max), limits.v_max)
        speed = math.hypot(vf, vl)
        if speed > limits.v_max:
            scale = limits.v_max / speed
            vf *= scale
            vl *= scale
        wr = min(
            max(self.camera_yaw_rate, -limits.camera_yaw_rate_max),
            limits.camera_yaw_rate_max,
        )
        return FlcCommand(v_forward=vf, v_lateral=vl, camera_yaw_rate=wr)


@dataclass(frozen=True)
class VehicleState:
    position: Point = (0.0, 0.0)
    heading: float = 0.0
    camera_yaw: float = 0.0
    velocity: Point = (0.0, 0.0)  # achieved, world frame
    time: float = 0.0

    @property
    def camera_angle(self) -> float:
        """World angle of the camera x-axis (math convention)."""
        return wrap_angle(self.heading + self.camera_yaw)

    @property
    def camera_forward_angle(self) -> float:
        """World direction the camera looks at (its +y axis)."""
        return wrap_angle(self.heading + self.camera_yaw + math.pi / 2.0)

    def body_velocity(self) -> Point:
        """Achieved velocity expressed in the body frame."""
        return rotate(self.velocity, -self.heading)


@dataclass(frozen=True)
class AntennaArray:
    """Corner receiver rectangle (FR, FL, BR, BL) around the central receiver."""

    delta_sx: float = 0.4
    delta_sy: float = 0.5
    gain_max_db: float = 0.0  # 0 disables the directional lobe
    gain_exponent: float = 2.0

    def __post_init__(self) -> None:
        if self.delta_sx <= 0.0 or self.delta_sy <= 0.0:
            raise ValueError("antenna separations must be > 0")

    def body_offsets(self) -> tuple[Point, Point, Point, Point, Point]:
        """Offsets in fixed (FR, FL, BR, BL, C) order."""
        hx, hy = self.delta_sx / 2.0, self.delta_sy / 2.0
        return ((hx, hy), (-hx, hy), (hx, -hy), (-hx, -hy), (0.0, 0.0))

    def boresights(self) -> tuple[float, float, float, float, float]:
        """Body-frame pointing angle of each receiver (corners point outward)."""
        angles = tuple(
            math.atan2(oy, ox) if (ox, oy) != (0.0, 0.0) else 0.0
            for ox, oy in self.body_offsets()
        )
        return angles  # type: ignore[return-value]


def antenna_positions(
    state: VehicleState, array: AntennaArray
) -> tuple[Point, Point, Point, Point, Point]:
    """World positions of the five receivers, in (FR, FL, BR, BL, C) order."""
    px, py = state.position
    out = []
    for off in array.body_offsets():
        wx, wy = rotate(off, state.heading)
        out.append((px + wx, py + wy))
    return tuple(out)  # type: ignore[return-value]


def _sweep(
    start: Point, end: Point, walls: tuple[WallSegment, ...]
) -> tuple[Point, bool]:
    """Stop the motion segment at the first wall contact, if any."""
    best_t: float | None = None
    for w in walls:
        t = segment_hit_param(start, end, w.p1, w.p2)
        if t is not None and (best_t is None or t < best_t):
            best_t = t
    if best_t is None:
        return end, False
    dx, dy = end[0] - start[0], end[1] - start[1]
    length = math.hypot(dx, dy)
    if length == 0.0:
        return start, True
    t_back = max(best_t - _CONTACT_EPS / length, 0.0)
    return (start[0] + dx * t_back, start[1] + dy * t_back), True


def step(
    state: VehicleState,
    cmd: FlcCommand,
    dt: float,
    walls: tuple[WallSegment, ...] = (),
    limits: VehicleLimits = VehicleLimits(),
) -> tuple[VehicleState, bool]:
    """Advance the vehicle one step; returns (new state, collided flag).

    Explicit Euler at dt <= 0.2 s. Wall contact stops the platform at the
    contact point (no penetration, no bounce); the achieved velocity reported
    in the state is the realized displacement over dt.
    """
    if not (0.0 < dt <= 0.2):
        raise ValueError("dt must be in (0, 0.2]")
    cmd = cmd.clamped(limits)
    camera_yaw = wrap_angle(state.camera_yaw + cmd.camera_yaw_rate * dt)

    world_v = rotate(
        (cmd.v_lateral, cmd.v_forward), wrap_angle(state.heading + camera_yaw)
    )
    target = (
        state.position[0] + world_v[0] * dt,
        state.position[1] + world_v[1] * dt,
    )
    new_pos, collided = _sweep(state.position, target, walls)
    achieved = (
        (new_pos[0] - state.position[0]) / dt,
        (new_pos[1] - state.position[1]) / dt,
    )

    heading = state.heading
    if math.hypot(cmd.v_forward, cmd.v_lateral) > 1e-9:
        # Free-look alignment: rotate the chassis under the camera without
        # moving the camera's world direction.
        slew = limits.heading_slew_rate * dt
        correction = min(max(camera_yaw, -slew), slew)
        heading = wrap_angle(heading + correction)
        camera_yaw = wrap_angle(camera_yaw - correction)

    return (
        replace(
            state,
            position=new_pos,
            heading=heading,
            camera_yaw=camera_yaw,
            velocity=achieved,
            time=state.time + dt,
        ),
        collided,
    )


@dataclass(frozen=True)
class OdometryNoise:
    """Dead-reckoning error model; all zeros reproduces ground truth."""

    velocity_scale_sigma: float = 0.0  # per-trial wheel calibration error
    velocity_white_sigma: float = 0.0  # per-step multiplicative jitter
    heading_drift_rate_sigma: float = 0.0  # rad/s, constant per trial

    @property
    def enabled(self) -> bool:
        return (
            self.velocity_scale_sigma > 0.0
            or self.velocity_white_sigma > 0.0
            or self.heading_drift_rate_sigma > 0.0
        )


@dataclass(frozen=True)
class OdometryReading:
    position: Point
    heading: float
    nu: Point  # body-frame velocity, the same frame Eq-style products use


class Odometry:
    """Integrates a noisy pose estimate alongside the true state."""

    def __init__(self, noise: OdometryNoise, seed: int, start: VehicleState):
        self._noise = noise
        self._rng = np.random.default_rng(seed)
        self._scale = 1.0 + (
            self._rng.normal(0.0, noise.velocity_scale_sigma)
            if noise.velocity_scale_sigma > 0.0
            else 0.0
        )
        self._drift_rate = (
            self._rng.normal(0.0, noise.heading_drift_rate_sigma)
            if noise.heading_drift_rate_sigma > 0.0
            else 0.0
        )
        self._position = start.position
        self._heading = start.heading
        self._last_true_heading = start.heading
        self._reading = OdometryReading(start.position, start.heading, (0.0, 0.0))

    @property
    def reading(self) -> OdometryReading:
        return self._reading

    def update(self, state: VehicleState, dt: float) -> OdometryReading:
        nu_true = state.body_velocity()
        if not self._noise.enabled:
            self._position = state.position
            self._heading = state.heading
            self._last_true_heading = state.heading
            self._reading = OdometryReading(state.position, state.heading, nu_true)
            return self._reading
        factor = self._scale
        if self._noise.velocity_white_sigma > 0.0:
            factor *= 1.0 + self._rng.normal(0.0, self._noise.velocity_white_sigma)
        nu = (nu_true[0] * factor, nu_true[1] * factor)

        d_heading = wrap_angle(state.heading - self._last_true_heading)
        self._last_true_heading = state.heading
        self._heading = wrap_angle(self._heading + d_heading + self._drift_rate * dt)

        step_world = rotate((nu[0] * dt, nu[1] * dt), self._heading)
        self._position = (
            self._position[0] + step_world[0],
            self._position[1] + step_world[1],
        )
        self._reading = OdometryReading(self._position, self._heading, nu)
        return self._reading
