"""Scenario rules engine: maze task, termination rules and trial logging.

A session steps the vehicle at the physics rate (20 Hz), samples the five
receivers from the radio field at the RSS rate (5 Hz), runs the estimation pipeline on every sample, detects wall
symbols in view, and appends one log record per tick. Two one-way terminal
transitions exist: TIMEOUT once the elapsed time reaches the limit, and
SIGNAL_LOST once the filtered central RSS stays under the disconnect
threshold for the hold duration. Commands after a terminal state are ignored.

The per-run radio channel realization is derived by mixing the map seed with
the session seed, so distinct seeds explore distinct shadowing/fading draws
while (scenario, seed, command stream) stays fully deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from enum import Enum
from importlib import resources
from pathlib import Path

from .estimation import DoaPipeline, EstimationConfig, PipelineOutput, percent_to_bars, rss_to_percent
from .evaluation import CoverageGrid
from .field import (
    FieldModel,
    MapFormatError,
    _mix64,
    clamp_rss,
    directional_gain_db,
    map_from_dict,
)
from .geometry import Point, dist, segments_intersect, wrap_angle
from .triallog import TrialLog, new_header
from .vehicle import (
    AntennaArray,
    FlcCommand,
    Odometry,
    OdometryNoise,
    VehicleLimits,
    VehicleState,
    antenna_positions,
    step,
)

SIGNAL_LOST_MESSAGE = "SIGNAL LOST"

_SCENARIO_KEYS = {
    "format_version",
    "name",
    "map",
    "spawn",
    "symbols",
    "time_limit_s",
    "disconnect_threshold_dbm",
    "disconnect_hold_s",
    "interface_mode",
    "limits",
    "antenna",
    "estimation",
    "odometry",
    "detection",
}
_SYMBOL_KEYS = {"id", "position", "normal", "size_cm2"}


class ScenarioFormatError(ValueError):
    pass


class SessionStatus(Enum):
    RUNNING = "RUNNING"
    TIMEOUT = "TIMEOUT"
    SIGNAL_LOST = "SIGNAL_LOST"


@dataclass(frozen=True)
class SymbolSpec:
    id: str
    position: Point
    normal: Point  # unit outward normal of the host wall
    size_cm2: float = 40.0


@dataclass(frozen=True)
class DetectionConfig:
    max_range_m: float = 1.5
    fov_deg: float = 90.0


@dataclass(frozen=True)
class Scenario:
    """Parsed scenario plus its canonical document (used for log headers)."""

    doc: dict
    name: str
    map_doc: dict
    spawn_position: Point
    spawn_heading: float
    spawn_camera_yaw: float
    symbols: tuple[SymbolSpec, ...]
    time_limit_s: float
    disconnect_threshold_dbm: float
    disconnect_hold_s: float
    interface_mode: str
    limits: VehicleLimits
    antenna: AntennaArray
    estimation: EstimationConfig
    odometry: OdometryNoise
    detection: DetectionConfig

    def build_field(self, seed: int = 0) -> FieldModel:
        doc = dict(self.map_doc)
        doc["seed"] = _mix64(doc["seed"], seed) & 0x7FFFFFFFFFFFFFFF
        return map_from_dict(doc)


def _point(raw: object, what: str) -> Point:
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise ScenarioFormatError(f"{what} must be an [x, y] pair")
    return (float(raw[0]), float(raw[1]))


def _sub_config(doc: dict, key: str, cls, what: str):
    raw = doc.get(key, {})
    if not isinstance(raw, dict):
        raise ScenarioFormatError(f"{what} must be an object")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"bad {what}: {exc}") from exc


def scenario_from_dict(doc: dict, base_dir: Path | None = None) -> Scenario:
    """Parse and validate a scenario document, resolving map references.

    A string `map` value is loaded relative to base_dir and embedded, so the
    resulting canonical document is self-contained.
    """
    if not isinstance(doc, dict):
        raise ScenarioFormatError("scenario must be a JSON object")
    unknown = set(doc) - _SCENARIO_KEYS
    if unknown:
        raise ScenarioFormatError(f"unknown scenario keys: {sorted(unknown)}")
    for key in ("name", "map", "spawn"):
        if key not in doc:
            raise ScenarioFormatError(f"scenario missing key '{key}'")

    map_doc = doc["map"]
    if isinstance(map_doc, str):
        map_path = (base_dir or Path.cwd()) / map_doc
        try:
            map_doc = json.loads(map_path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ScenarioFormatError(f"cannot read map '{map_doc}': {exc}") from exc
    if not isinstance(map_doc, dict):
        raise ScenarioFormatError("map must be an object or a file reference")
    field_model = map_from_dict(map_doc)  # validates the map document

    resolved = dict(doc)
    resolved["map"] = map_doc

    spawn = doc["spawn"]
    if not isinstance(spawn, dict) or "position" not in spawn:
        raise ScenarioFormatError("spawn must be {position, heading?, camera_yaw?}")
    spawn_pos = _point(spawn["position"], "spawn.position")
    if not field_model.contains(spawn_pos):
        raise ScenarioFormatError("spawn position outside map bounds")

    symbols = []
    for i, s in enumerate(doc.get("symbols", [])):
        if not isinstance(s, dict) or set(s) - _SYMBOL_KEYS:
            raise ScenarioFormatError(f"symbols[{i}] must have keys {sorted(_SYMBOL_KEYS)}")
        pos = _point(s["position"], f"symbols[{i}].position")
        normal = _point(s["normal"], f"symbols[{i}].normal")
        norm = math.hypot(*normal)
        if norm == 0.0:
            raise ScenarioFormatError(f"symbols[{i}].normal must be nonzero")
        normal = (normal[0] / norm, normal[1] / norm)
        near_wall = any(
            _point_segment_distance(pos, w.p1, w.p2) <= 0.1
            for w in field_model.walls
        )
        if not near_wall:
            raise ScenarioFormatError(f"symbols[{i}] is not on a wall")
        symbols.append(
            SymbolSpec(
                id=str(s["id"]),
                position=pos,
                normal=normal,
                size_cm2=float(s.get("size_cm2", 40.0)),
            )
        )

    time_limit = float(doc.get("time_limit_s", 180.0))
    if time_limit <= 0.0:
        raise ScenarioFormatError("time_limit_s must be > 0")
    mode = doc.get("interface_mode", "vdoa")
    if mode not in ("vdoa", "bar"):
        raise ScenarioFormatError("interface_mode must be 'vdoa' or 'bar'")

    return Scenario(
        doc=resolved,
        name=str(doc["name"]),
        map_doc=map_doc,
        spawn_position=spawn_pos,
        spawn_heading=float(spawn.get("heading", 0.0)),
        spawn_camera_yaw=float(spawn.get("camera_yaw", 0.0)),
        symbols=tuple(symbols),
        time_limit_s=time_limit,
        disconnect_threshold_dbm=float(doc.get("disconnect_threshold_dbm", -85.0)),
        disconnect_hold_s=float(doc.get("disconnect_hold_s", 2.0)),
        interface_mode=mode,
        limits=_sub_config(doc, "limits", VehicleLimits, "limits"),
        antenna=_sub_config(doc, "antenna", AntennaArray, "antenna"),
        estimation=_sub_config(doc, "estimation", EstimationConfig, "estimation"),
        odometry=_sub_config(doc, "odometry", OdometryNoise, "odometry"),
        detection=_sub_config(doc, "detection", DetectionConfig, "detection"),
    )


def _point_segment_distance(p: Point, a: Point, b: Point) -> float:
    abx, aby = b[0] - a[0], b[1] - a[1]
    apx, apy = p[0] - a[0], p[1] - a[1]
    denom = abx * abx + aby * aby
    t = 0.0 if denom == 0.0 else min(max((apx * abx + apy * aby) / denom, 0.0), 1.0)
    return math.hypot(apx - t * abx, apy - t * aby)


def packaged_scenario_names() -> list[str]:
    data = resources.files("doateleop") / "data"
    return sorted(
        p.name[: -len(".json")]
        for p in data.iterdir()
        if p.name.endswith(".json") and not p.name.endswith("_map.json")
    )


def load_scenario(name_or_path: str | Path) -> Scenario:
    """Load a scenario by file path or by packaged name."""
    path = Path(name_or_path)
    if path.is_file():
        doc = json.loads(path.read_text(encoding="utf-8"))
        return scenario_from_dict(doc, base_dir=path.parent)
    data = resources.files("doateleop") / "data" / f"{name_or_path}.json"
    try:
        text = data.read_text(encoding="utf-8")
    except (FileNotFoundError, OSError) as exc:
        raise ScenarioFormatError(
            f"unknown scenario '{name_or_path}' (not a file, not packaged; "
            f"packaged: {packaged_scenario_names()})"
        ) from exc
    with resources.as_file(resources.files("doateleop") / "data") as data_dir:
        return scenario_from_dict(json.loads(text), base_dir=Path(data_dir))


def apply_noise_mode(scenario: Scenario, mode: str | dict) -> Scenario:
    """Return a scenario with its noise configuration replaced.

    "default" keeps the file as-is. "off" zeroes the channel sigmas and the
    odometry noise and switches the filters to passthrough: the temporal and
    spatial filters exist to counter channel noise, so a noise-free channel
    runs the bare gradient pipeline. A dict overrides propagation /
    estimation / odometry keys selectively.
    """
    if mode == "default":
        return scenario
    doc = json.loads(json.dumps(scenario.doc))  # deep copy
    if mode == "off":
        doc["map"]["propagation"]["shadowing_sigma_db"] = 0.0
        doc["map"]["propagation"]["fading_sigma_db"] = 0.0
        doc["odometry"] = {}
        est = dict(doc.get("estimation", {}))
        est["alpha"] = 1.0
        est["n_max"] = 1
        doc["estimation"] = est
    elif isinstance(mode, dict):
        for key in ("propagation", "estimation", "odometry"):
            if key in mode:
                if key == "propagation":
                    doc["map"]["propagation"].update(mode[key])
                else:
                    doc.setdefault(key, {})
                    doc[key].update(mode[key])
        extra = set(mode) - {"propagation", "estimation", "odometry"}
        if extra:
            raise ScenarioFormatError(f"unknown noise override keys: {sorted(extra)}")
    else:
        raise ScenarioFormatError(f"unknown noise mode {mode!r}")
    return scenario_from_dict(doc)


def detect_symbols(
    state: VehicleState,
    symbols: tuple[SymbolSpec, ...],
    walls,
    detection: DetectionConfig = DetectionConfig(),
) -> set[str]:
    """Symbols currently visible: near, inside the camera FOV, facing the
    robot, and with unobstructed line of sight."""
    seen: set[str] = set()
    half_fov = math.radians(detection.fov_deg) / 2.0
    cam_dir = state.camera_forward_angle
    for sym in symbols:
        to_sym = (sym.position[0] - state.position[0], sym.position[1] - state.position[1])
        d = math.hypot(*to_sym)
        if d > detection.max_range_m or d == 0.0:
            continue
        if abs(wrap_angle(math.atan2(to_sym[1], to_sym[0]) - cam_dir)) > half_fov:
            continue
        if to_sym[0] * sym.normal[0] + to_sym[1] * sym.normal[1] >= 0.0:
            continue  # looking at the back of the wall
        # Probe a point nudged off the host wall so it does not self-occlude.
        probe = (
            sym.position[0] + sym.normal[0] * 0.01,
            sym.position[1] + sym.normal[1] * 0.01,
        )
        if any(segments_intersect(state.position, probe, w.p1, w.p2) for w in walls):
            continue
        seen.add(sym.id)
    return seen


@dataclass(frozen=True)
class SessionConfig:
    physics_dt: float = 0.05
    rss_every: int = 4  # physics ticks per RSS sample -> 5 Hz
    telemetry_every: int = 2  # physics ticks per telemetry frame -> 10 Hz
    coverage_cell_m: float = 0.15
    tau: float = 0.1
    derivative_source: str = "filtered"

    @property
    def rss_interval_s(self) -> float:
        return self.physics_dt * self.rss_every

    def to_dict(self) -> dict:
        return {
            "physics_dt": self.physics_dt,
            "rss_every": self.rss_every,
            "telemetry_every": self.telemetry_every,
            "rss_interval_s": self.rss_interval_s,
            "coverage_cell_m": self.coverage_cell_m,
            "tau": self.tau,
            "derivative_source": self.derivative_source,
        }


@dataclass
class TelemetryFrame:
    t: float
    status: str
    time_remaining: float
    odo_pose: tuple[float, float, float]
    camera_yaw: float
    rss_percent: float
    rss_bars: int
    bar_segments: tuple[float, ...]
    bar_brightness: float
    symbols_found: tuple[str, ...]
    collision: bool
    collisions_total: int
    applied_control: tuple[float, float, float] = (0.0, 0.0, 0.0)
    # Debug-only fields; the server strips them unless explicitly enabled.
    true_pose: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rss_raw: tuple[float, ...] = ()
    doa_body: float | None = None
    doa_camera: float | None = None
    doa_magnitude: float = 0.0


class Session:
    """Single-threaded simulation engine owning all mutable trial state."""

    def __init__(self, scenario: Scenario, seed: int = 0, config: SessionConfig | None = None):
        self.scenario = scenario
        self.seed = seed
        self.config = config or SessionConfig()
        self.field = scenario.build_field(seed)
        self.state = VehicleState(
            position=scenario.spawn_position,
            heading=wrap_angle(scenario.spawn_heading),
            camera_yaw=wrap_angle(scenario.spawn_camera_yaw),
            time=0.0,
        )
        self.pipeline = DoaPipeline(
            scenario.estimation,
            scenario.antenna,
            sample_rate=1.0 / self.config.rss_interval_s,
            wavelength=self.field.wavelength_m,
        )
        self.odometry = Odometry(
            scenario.odometry, seed=_mix64(seed, 0x0D0) & 0xFFFFFFFF, start=self.state
        )
        self.coverage = CoverageGrid(
            origin=self.field.bounds[0],
            cell_size=self.config.coverage_cell_m,
            bounds=self.field.bounds,
        )
        self.status = SessionStatus.RUNNING
        self.symbols_found: set[str] = set()
        self.collision_count = 0
        self.tick_index = 0
        self._low_rss_since: float | None = None
        self._last_output: PipelineOutput | None = None
        self._last_raw: tuple[float, ...] = ()
        self._last_frame: TelemetryFrame | None = None
        self._prev_collided = False
        self._pending_events: list[dict] = []
        self.log = TrialLog(
            header=new_header(scenario.doc, seed, self.config.to_dict())
        )

    @property
    def elapsed(self) -> float:
        return round(self.tick_index * self.config.physics_dt, 9)

    @property
    def last_output(self) -> PipelineOutput | None:
        """Latest estimation output; what headless pilots steer from."""
        return self._last_output

    @property
    def terminal(self) -> bool:
        return self.status is not SessionStatus.RUNNING

    def _sample_rss(self, t: float) -> tuple[float, ...]:
        positions = antenna_positions(self.state, self.scenario.antenna)
        array = self.scenario.antenna
        values = []
        for pos, bore in zip(positions, array.boresights()):
            v = self.field.rss_at(pos, t)
            if array.gain_max_db != 0.0:
                bearing = self.field.bearing_to_ap(pos)
                v = clamp_rss(
                    v
                    + directional_gain_db(
                        wrap_angle(self.state.heading + bore),
                        bearing,
                        array.gain_max_db,
                        array.gain_exponent,
                    )
                )
            values.append(v)
        return tuple(values)

    def tick(self, cmd: FlcCommand) -> TelemetryFrame:
        """Advance one physics step; returns the frame for this tick."""
        if self.terminal:
            assert self._last_frame is not None
            return self._last_frame

        dt = self.config.physics_dt
        events: list[dict] = self._pending_events
        self._pending_events = []
        self.state, collided = step(
            self.state, cmd, dt, self.field.walls, self.scenario.limits
        )
        if collided and not self._prev_collided:
            self.collision_count += 1
        self._prev_collided = collided
        odo = self.odometry.update(self.state, dt)
        self.tick_index += 1
        t = self.elapsed

        sample_tick = self.tick_index % self.config.rss_every == 0
        raw: tuple[float, ...] | None = None
        if sample_tick:
            raw = self._sample_rss(t)
            self._last_raw = raw
            speed = math.hypot(*odo.nu)
            self._last_output = self.pipeline.update(
                raw, speed, self.state.camera_yaw, t
            )
            self.coverage.visit(self.state.position)
            rc_f = self._last_output.corners.r_c
            if rc_f < self.scenario.disconnect_threshold_dbm:
                if self._low_rss_since is None:
                    self._low_rss_since = t
            else:
                self._low_rss_since = None

        newly_seen = (
            detect_symbols(
                self.state, self.scenario.symbols, self.field.walls, self.scenario.detection
            )
            - self.symbols_found
        )
        for sym_id in sorted(newly_seen):
            self.symbols_found.add(sym_id)
            events.append({"type": "symbol_found", "id": sym_id})

        if t >= self.scenario.time_limit_s:
            self.status = SessionStatus.TIMEOUT
            events.append({"type": "status", "value": "TIMEOUT"})
        elif (
            self._low_rss_since is not None
            and t - self._low_rss_since >= self.scenario.disconnect_hold_s
        ):
            self.status = SessionStatus.SIGNAL_LOST
            events.append({"type": "status", "value": "SIGNAL_LOST"})

        self._append_record(t, cmd, odo, raw, collided, events)
        applied = cmd.clamped(self.scenario.limits)
        self._last_frame = self._build_frame(t, odo, collided, applied)
        return self._last_frame

    def mark_found(self, symbol_id: str | None) -> None:
        """Queue an operator 'mark found' action for the next log record."""
        if self.terminal:
            return
        self._pending_events.append({"type": "mark_found", "id": symbol_id})

    def _append_record(
        self,
        t: float,
        cmd: FlcCommand,
        odo,
        raw: tuple[float, ...] | None,
        collided: bool,
        events: list[dict],
    ) -> None:
        rec: dict = {
            "t": t,
            "status": self.status.value,
            "pose": [self.state.position[0], self.state.position[1], self.state.heading],
            "cam": self.state.camera_yaw,
            "odo": [odo.position[0], odo.position[1], odo.heading, odo.nu[0], odo.nu[1]],
            "cmd": [cmd.v_forward, cmd.v_lateral, cmd.camera_yaw_rate],
            "coll": collided,
        }
        if raw is not None and self._last_output is not None:
            out = self._last_output
            rec["rss"] = {
                "raw": list(raw),
                "ewma": list(out.ewma),
                "filt": [
                    out.corners.r_fr,
                    out.corners.r_fl,
                    out.corners.r_br,
                    out.corners.r_bl,
                    out.corners.r_c,
                ],
            }
            rec["g"] = [out.gradient.gx, out.gradient.gy]
            rec["doa"] = (
                [out.doa_body.theta, out.doa_camera.theta, out.doa_body.magnitude]
                if out.doa_body is not None and out.doa_camera is not None
                else None
            )
            rec["bar"] = list(out.bar.segments)
            rec["bright"] = out.bar.brightness
            rec["win"] = out.window_size
        if events:
            rec["events"] = events
        self.log.append(rec)

    def _build_frame(self, t: float, odo, collided: bool, applied: FlcCommand) -> TelemetryFrame:
        out = self._last_output
        if out is not None:
            percent = rss_to_percent(
                out.corners.r_c, self.scenario.estimation.rss_lo, self.scenario.estimation.rss_hi
            )
            segments = out.bar.segments
            brightness = out.bar.brightness
            rss_raw = self._last_raw
            doa_body = out.doa_body.theta if out.doa_body else None
            doa_cam = out.doa_camera.theta if out.doa_camera else None
            doa_mag = out.doa_body.magnitude if out.doa_body else 0.0
        else:
            percent = 0.0
            segments = (0.0,) * self.scenario.estimation.segments
            brightness = 0.0
            rss_raw = ()
            doa_body = None
            doa_cam = None
            doa_mag = 0.0
        return TelemetryFrame(
            t=t,
            status=self.status.value,
            time_remaining=max(self.scenario.time_limit_s - t, 0.0),
            odo_pose=(odo.position[0], odo.position[1], odo.heading),
            camera_yaw=self.state.camera_yaw,
            rss_percent=percent,
            rss_bars=percent_to_bars(percent),
            bar_segments=segments,
            bar_brightness=brightness,
            symbols_found=tuple(sorted(self.symbols_found)),
            collision=collided,
            collisions_total=self.collision_count,
            applied_control=(applied.v_forward, applied.v_lateral, applied.camera_yaw_rate),
            true_pose=(self.state.position[0], self.state.position[1], self.state.heading),
            rss_raw=rss_raw,
            doa_body=doa_body,
            doa_camera=doa_cam,
            doa_magnitude=doa_mag,
        )
