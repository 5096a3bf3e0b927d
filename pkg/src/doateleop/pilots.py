"""Scripted pilots for headless trials.

Pilots only consume operator-visible quantities: the estimation output (what
the color bar encodes) and the odometry pose, never the true pose or the AP
location. Commands are recomputed at the RSS sampling cadence, mimicking an
operator reacting to the displayed feedback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .geometry import rotate, wrap_angle
from .session import Session
from .vehicle import FlcCommand


class Pilot:
    """Base policy: produce a command from the current session view."""

    def reset(self, session: Session) -> None:  # pragma: no cover - trivial
        pass

    def command(self, session: Session) -> FlcCommand:
        raise NotImplementedError


@dataclass
class GradientFollowerPilot(Pilot):
    """Stop-and-go policy that hops along the estimated DoA.

    Mimics the short-mission driving pattern: pause, read the bar, commit to
    a straight leg, pause again. Pauses let the averaging window settle on
    the spot (static samples fall inside the evaluation dead zone), and each
    leg follows the freshly settled estimate. Above explore_above_dbm the
    leg direction is random instead (an operator with a strong link searches
    the area and returns to the DoA when the link degrades). The camera is
    kept still: rotating it churns the body frame under the spatial filter,
    and the platform strafes omnidirectionally anyway.
    """

    speed: float = 0.11
    jitter_std: float = 0.1
    hold_s: float = 13.0  # covers the averaging window at this speed
    move_s: float = 20.0
    explore_above_dbm: float = -56.0
    follow_below_dbm: float = -61.0
    seed: int = 0
    _rng: np.random.Generator = dc_field(init=False, repr=False, default=None)  # type: ignore[assignment]
    _direction: float = dc_field(init=False, default=math.pi / 2.0)
    _phase_until: float = dc_field(init=False, default=0.0)
    _moving: bool = dc_field(init=False, default=False)
    _exploring: bool = dc_field(init=False, default=False)
    _escape_until: float = dc_field(init=False, default=-1.0)
    _escape_sign: float = dc_field(init=False, default=1.0)

    def reset(self, session: Session) -> None:
        self._rng = np.random.default_rng(self.seed)
        self._direction = math.pi / 2.0
        self._moving = True  # first leg starts immediately from the spawn
        self._phase_until = self.move_s
        self._exploring = False
        self._escape_until = -1.0

    def _leg_direction(self, session: Session) -> float:
        out = session.last_output
        if out is not None:
            rc = out.corners.r_c
            if not self._exploring and rc >= self.explore_above_dbm:
                self._exploring = True
            elif self._exploring and rc <= self.follow_below_dbm:
                self._exploring = False
        if out is None or out.doa_camera is None:
            return float(self._rng.uniform(-math.pi, math.pi))
        if self._exploring:
            # Retreat roughly down the gradient: search legs point away from
            # the strong zone, then the next follow leg climbs back.
            return out.doa_camera.theta + math.pi + float(self._rng.uniform(-0.6, 0.6))
        return out.doa_camera.theta + float(self._rng.normal(0.0, self.jitter_std))

    def command(self, session: Session) -> FlcCommand:
        t = session.elapsed
        if t >= self._phase_until:
            self._moving = not self._moving
            if self._moving:
                self._direction = self._leg_direction(session)
                self._phase_until = t + self.move_s
            else:
                self._phase_until = t + self.hold_s
        if not self._moving:
            return FlcCommand()

        heading_cmd = self._direction
        frame = session._last_frame
        if frame is not None and frame.collision and t >= self._escape_until:
            self._escape_until = t + 1.5
            self._escape_sign = 1.0 if self._rng.random() < 0.5 else -1.0
        if t < self._escape_until:
            heading_cmd = self._direction + self._escape_sign * (2.0 * math.pi / 3.0)
        return FlcCommand(
            v_forward=self.speed * math.sin(heading_cmd),
            v_lateral=self.speed * math.cos(heading_cmd),
        )


@dataclass
class WaypointPilot(Pilot):
    """Tracks a list of world waypoints using the odometry pose.

    Dwells at each waypoint before heading to the next one; the pause lets
    the averaging window settle so leg starts are not polluted by the
    previous leg (static samples sit inside the evaluation dead zone).
    """

    waypoints: tuple[tuple[float, float], ...] = ()
    speed: float = 0.125
    arrive_radius: float = 0.08
    slow_radius: float = 0.4
    dwell_s: float = 12.0
    stuck_timeout_s: float = 12.0
    loop: bool = False
    _index: int = dc_field(init=False, default=0)
    _dwell_until: float = dc_field(init=False, default=0.0)
    _best_d: float = dc_field(init=False, default=math.inf)
    _best_t: float = dc_field(init=False, default=0.0)

    def reset(self, session: Session) -> None:
        if not self.waypoints:
            raise ValueError("waypoint pilot needs at least one waypoint")
        self._index = 0
        self._dwell_until = 0.0
        self._best_d = math.inf
        self._best_t = 0.0

    @property
    def finished(self) -> bool:
        return not self.loop and self._index >= len(self.waypoints)

    def _advance(self, t: float) -> None:
        self._index += 1
        self._dwell_until = t + self.dwell_s
        self._best_d = math.inf
        self._best_t = t

    def command(self, session: Session) -> FlcCommand:
        t = session.elapsed
        if self.finished or t < self._dwell_until:
            return FlcCommand()
        odo = session.odometry.reading
        wx, wy = self.waypoints[self._index % len(self.waypoints)]
        dx, dy = wx - odo.position[0], wy - odo.position[1]
        d = math.hypot(dx, dy)
        if d < self.arrive_radius:
            self._advance(t)
            return FlcCommand()
        # A waypoint that stops getting closer (wall snag, drift) is skipped
        # rather than pushed into forever.
        if d < self._best_d - 0.05:
            self._best_d = d
            self._best_t = t
        elif t - self._best_t > self.stuck_timeout_s:
            self._advance(t)
            return FlcCommand()
        v = self.speed if d > self.slow_radius else max(self.speed * d / self.slow_radius, 0.04)
        world = (v * dx / d, v * dy / d)
        # Commands live in the camera frame; undo the camera's world angle.
        cam = rotate(world, -(odo.heading + session.state.camera_yaw))
        return FlcCommand(v_forward=cam[1], v_lateral=cam[0], camera_yaw_rate=0.0)


@dataclass
class RandomWalkPilot(Pilot):
    """World-direction random walk with collision turnarounds."""

    speed: float = 0.2
    turn_noise: float = 0.4
    seed: int = 0
    _rng: np.random.Generator = dc_field(init=False, repr=False, default=None)  # type: ignore[assignment]
    _theta: float = dc_field(init=False, default=0.0)

    def reset(self, session: Session) -> None:
        self._rng = np.random.default_rng(self.seed)
        self._theta = float(self._rng.uniform(-math.pi, math.pi))

    def command(self, session: Session) -> FlcCommand:
        frame = session._last_frame
        if frame is not None and frame.collision:
            self._theta = wrap_angle(
                self._theta + math.pi * (0.75 + 0.5 * float(self._rng.random()))
            )
        else:
            self._theta = wrap_angle(self._theta + float(self._rng.normal(0.0, self.turn_noise)))
        odo = session.odometry.reading
        world = (self.speed * math.cos(self._theta), self.speed * math.sin(self._theta))
        cam = rotate(world, -(odo.heading + session.state.camera_yaw))
        return FlcCommand(v_forward=cam[1], v_lateral=cam[0])


def make_pilot(kind: str, seed: int = 0, **params) -> Pilot:
    """Factory used by the CLI; kind is gradient, waypoint or random."""
    if kind in ("gradient", "gradient-follower"):
        return GradientFollowerPilot(seed=seed, **params)
    if kind == "waypoint":
        wps = params.pop("waypoints", None)
        if not wps:
            raise ValueError("waypoint pilot requires waypoints")
        return WaypointPilot(waypoints=tuple(tuple(w) for w in wps), **params)
    if kind in ("random", "random-walk"):
        return RandomWalkPilot(seed=seed, **params)
    raise ValueError(f"unknown pilot kind {kind!r}")
