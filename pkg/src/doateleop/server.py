"""Network boundary: live sessions and log replay over a websocket.

One operator connection per session key; the engine task steps physics at
20 Hz (wall-clock paced by the speed factor, unpaced when speed <= 0) and
applies the most recent control message each tick, last-write-wins. Frames
go out at the telemetry rate; ground-truth fields (true pose, raw RSS, DoA
angles, AP location) are only serialized when the server runs with the
debug flag, so an operator cannot see what the study hid from participants.

Endpoints:
  GET  /healthz                       liveness probe
  GET  /scenarios                     names servable by this process
  GET  /map/{name}                    operator-safe geometry for rendering
  WS   /session?scenario=&mode=&seed= live drive (or replay when started
                                      with a log); speed= scales pacing
"""

from __future__ import annotations

import asyncio
import json
import math
import os
from dataclasses import dataclass, field

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .session import (
    Scenario,
    Session,
    SessionConfig,
    TelemetryFrame,
    load_scenario,
    scenario_from_dict,
)
from .triallog import TrialLog
from .vehicle import FlcCommand

ENV_PREFIX = "DOATELEOP_"


def _env(name: str, default: str) -> str:
    return os.environ.get(ENV_PREFIX + name, default)


@dataclass
class LiveSession:
    session: Session
    mode: str
    control: FlcCommand = field(default_factory=FlcCommand)
    marks: list[str | None] = field(default_factory=list)
    started: bool = False
    operator_attached: bool = False
    grace_task: asyncio.Task | None = None


def frame_to_message(
    frame: TelemetryFrame, mode: str, debug: bool, ap: tuple[float, float] | None = None
) -> dict:
    msg = {
        "type": "telemetry",
        "t": frame.t,
        "status": frame.status,
        "time_remaining": frame.time_remaining,
        "odometry": {
            "x": frame.odo_pose[0],
            "y": frame.odo_pose[1],
            "heading": frame.odo_pose[2],
        },
        "camera_yaw": frame.camera_yaw,
        "rss_percent": frame.rss_percent,
        "rss_bars": frame.rss_bars,
        "symbols_found": list(frame.symbols_found),
        "collision": frame.collision,
        "collisions_total": frame.collisions_total,
        "applied_control": {
            "v_forward": frame.applied_control[0],
            "v_lateral": frame.applied_control[1],
            "camera_yaw_rate": frame.applied_control[2],
        },
    }
    if mode == "vdoa":
        msg["bar_segments"] = list(frame.bar_segments)
        msg["bar_brightness"] = frame.bar_brightness
    if debug:
        msg["debug"] = {
            "true_pose": list(frame.true_pose),
            "rss_raw": list(frame.rss_raw),
            "doa_body": frame.doa_body,
            "doa_camera": frame.doa_camera,
            "doa_magnitude": frame.doa_magnitude,
            "ap": list(ap) if ap else None,
        }
    return msg


def map_message(scenario: Scenario, debug: bool = False) -> dict:
    doc = scenario.map_doc
    msg = {
        "name": scenario.name,
        "bounds": doc["bounds"],
        "walls": [
            {"p1": w["p1"], "p2": w["p2"]} for w in doc.get("walls", [])
        ],
        "symbols": [
            {
                "id": s.id,
                "position": list(s.position),
                "normal": list(s.normal),
                "size_cm2": s.size_cm2,
            }
            for s in scenario.symbols
        ],
        "spawn": {
            "position": list(scenario.spawn_position),
            "heading": scenario.spawn_heading,
        },
        "time_limit_s": scenario.time_limit_s,
        "interface_mode": scenario.interface_mode,
    }
    if debug:
        msg["ap"] = doc["ap"]
    return msg


def _parse_control(raw: dict, limits) -> FlcCommand:
    def num(key: str) -> float:
        v = raw.get(key, 0.0)
        if not isinstance(v, (int, float)) or not math.isfinite(float(v)):
            raise ValueError(f"field '{key}' must be a finite number")
        return float(v)

    return FlcCommand(
        v_forward=num("v_forward"),
        v_lateral=num("v_lateral"),
        camera_yaw_rate=num("camera_yaw_rate"),
    ).clamped(limits)


def create_app(
    scenario_dirs: list[str] | None = None,
    debug: bool = False,
    grace_s: float = 30.0,
    replay_log: TrialLog | None = None,
    frontend_dir: str | None = None,
) -> FastAPI:
    """Build the service; with replay_log set, /session replays that log."""
    app = FastAPI(title="doateleop")
    app.state.sessions: dict[tuple, LiveSession] = {}
    app.state.debug = debug
    app.state.grace_s = grace_s
    app.state.replay_log = replay_log

    def resolve(name: str) -> Scenario:
        for d in scenario_dirs or []:
            candidate = os.path.join(d, f"{name}.json")
            if os.path.exists(candidate):
                return load_scenario(candidate)
        return load_scenario(name)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.get("/scenarios")
    def scenarios() -> dict:
        from .session import packaged_scenario_names

        return {"scenarios": packaged_scenario_names()}

    @app.get("/map/{name}")
    def map_geometry(name: str) -> dict:
        scenario = resolve(name)
        return map_message(scenario, debug=app.state.debug)

    @app.websocket("/session")
    async def session_ws(ws: WebSocket) -> None:
        if app.state.replay_log is not None:
            await _replay_session(ws, app)
            return
        await _live_session(ws, app, resolve)

    if frontend_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="console")

    return app


async def _send_error(ws: WebSocket, detail: str) -> None:
    await ws.send_text(json.dumps({"type": "error", "detail": detail}))


async def _live_session(ws: WebSocket, app: FastAPI, resolve) -> None:
    params = ws.query_params
    name = params.get("scenario", "default")
    mode = params.get("mode", "")
    seed = int(params.get("seed", "0"))
    speed = float(params.get("speed", "1.0"))
    key = (name, mode, seed)

    live = app.state.sessions.get(key)
    if live is not None and live.operator_attached:
        await ws.accept()
        await _send_error(ws, "session already has an operator")
        await ws.close(code=4409)
        return
    if live is None:
        try:
            scenario = resolve(name)
        except Exception as exc:  # noqa: BLE001 - reported to the client
            await ws.accept()
            await _send_error(ws, f"unknown scenario: {exc}")
            await ws.close(code=4404)
            return
        if mode:
            doc = json.loads(json.dumps(scenario.doc))
            doc["interface_mode"] = mode
            scenario = scenario_from_dict(doc)
        live = LiveSession(
            session=Session(scenario, seed=seed), mode=scenario.interface_mode
        )
        app.state.sessions[key] = live
    if live.grace_task is not None:
        live.grace_task.cancel()
        live.grace_task = None
    live.operator_attached = True

    await ws.accept()
    session = live.session
    await ws.send_text(
        json.dumps(
            {
                "type": "hello",
                "scenario": session.scenario.name,
                "mode": live.mode,
                "seed": seed,
                "time_limit_s": session.scenario.time_limit_s,
                "resumed": live.started,
            }
        )
    )

    config = session.config
    frame_every = config.telemetry_every
    tick_dt = config.physics_dt

    async def read_controls() -> None:
        while True:
            raw = await ws.receive_text()
            try:
                msg = json.loads(raw)
                if not isinstance(msg, dict):
                    raise ValueError("message must be a JSON object")
                kind = msg.get("type")
                if kind == "start":
                    live.started = True
                elif kind == "control":
                    live.control = _parse_control(msg, session.scenario.limits)
                    if msg.get("mark_found") is not None:
                        session.mark_found(str(msg["mark_found"]))
                else:
                    raise ValueError(f"unknown message type {kind!r}")
            except (ValueError, TypeError) as exc:
                await _send_error(ws, str(exc))

    reader = asyncio.create_task(read_controls())
    try:
        while not live.started:
            if reader.done():
                reader.result()
                return
            await asyncio.sleep(0.01)
        loop = asyncio.get_event_loop()
        next_tick = loop.time()
        while not session.terminal:
            frame = session.tick(live.control)
            if session.tick_index % frame_every == 0:
                await ws.send_text(
                    json.dumps(
                        frame_to_message(
                            frame, live.mode, app.state.debug, session.field.ap_position
                        )
                    )
                )
            if speed > 0:
                next_tick += tick_dt / speed
                delay = next_tick - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
                else:
                    await asyncio.sleep(0)
            else:
                await asyncio.sleep(0)
            if reader.done():
                reader.result()
        final = session.tick(FlcCommand())
        await ws.send_text(
            json.dumps(
                frame_to_message(
                    final, live.mode, app.state.debug, session.field.ap_position
                )
            )
        )
        app.state.sessions.pop(key, None)
        await asyncio.sleep(0.05)
        await ws.close()
    except (WebSocketDisconnect, RuntimeError):
        # RuntimeError: starlette raises it when sending after a client close.
        pass
    finally:
        # Runs on clean close, disconnect, and task cancellation alike: detach
        # the operator and keep an unfinished session resumable for a while.
        reader.cancel()
        if app.state.sessions.get(key) is live:
            live.operator_attached = False
            if session.terminal:
                app.state.sessions.pop(key, None)
            elif live.grace_task is None:

                async def expire() -> None:
                    await asyncio.sleep(app.state.grace_s)
                    app.state.sessions.pop(key, None)

                live.grace_task = asyncio.create_task(expire())


async def _replay_session(ws: WebSocket, app: FastAPI) -> None:
    """Stream logged telemetry; controls are ignored, speed 0 = step mode."""
    log: TrialLog = app.state.replay_log
    speed = float(ws.query_params.get("speed", "1.0"))
    mode = log.header["scenario"].get("interface_mode", "vdoa")
    await ws.accept()
    await ws.send_text(
        json.dumps(
            {
                "type": "hello",
                "replay": True,
                "scenario": log.header["scenario"].get("name", "?"),
                "mode": mode,
                "records": len(log.records),
            }
        )
    )
    est = log.header["scenario"].get("estimation", {})
    rss_lo = est.get("rss_lo", -90.0)
    rss_hi = est.get("rss_hi", -30.0)
    k = est.get("segments", 16)
    time_limit = log.header["scenario"].get("time_limit_s", 180.0)

    from .estimation import percent_to_bars, rss_to_percent

    found: list[str] = []
    last_bar = [0.0] * k
    last_bright = 0.0
    last_rc = None
    prev_t = None
    try:
        for rec in log.records:
            if speed <= 0:
                while True:
                    msg = json.loads(await ws.receive_text())
                    if msg.get("type") == "step":
                        break
            elif prev_t is not None:
                await asyncio.sleep(max(rec["t"] - prev_t, 0.0) / speed)
            prev_t = rec["t"]
            for ev in rec.get("events", ()):
                if ev.get("type") == "symbol_found":
                    found.append(ev["id"])
            if rec.get("rss") is not None:
                last_rc = rec["rss"]["filt"][4]
                last_bar = rec.get("bar") or last_bar
                last_bright = rec.get("bright") or last_bright
            percent = rss_to_percent(last_rc, rss_lo, rss_hi) if last_rc is not None else 0.0
            frame = {
                "type": "telemetry",
                "t": rec["t"],
                "status": rec.get("status", "RUNNING"),
                "time_remaining": max(time_limit - rec["t"], 0.0),
                "odometry": {
                    "x": rec["odo"][0],
                    "y": rec["odo"][1],
                    "heading": rec["odo"][2],
                },
                "camera_yaw": rec["cam"],
                "rss_percent": percent,
                "rss_bars": percent_to_bars(percent),
                "symbols_found": sorted(set(found)),
                "collision": bool(rec.get("coll", False)),
                "collisions_total": 0,
            }
            if mode == "vdoa":
                frame["bar_segments"] = list(last_bar)
                frame["bar_brightness"] = last_bright
            await ws.send_text(json.dumps(frame))
        await ws.close()
    except WebSocketDisconnect:
        pass


def run_server(
    app: FastAPI, host: str | None = None, port: int | None = None
) -> None:
    import uvicorn

    uvicorn.run(
        app,
        host=host or _env("HOST", "127.0.0.1"),
        port=int(port or _env("PORT", "8750")),
        log_level="warning",
    )
