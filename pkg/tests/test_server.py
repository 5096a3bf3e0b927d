import json

import pytest
from fastapi.testclient import TestClient

from doateleop.server import create_app
from doateleop.session import Session, scenario_from_dict
from doateleop.triallog import write_log
from doateleop.vehicle import FlcCommand

from test_session import small_scenario_doc


@pytest.fixture()
def tiny_dir(tmp_path):
    doc = small_scenario_doc(time_limit=4.0)
    doc["name"] = "tiny"
    (tmp_path / "tiny.json").write_text(json.dumps(doc))
    return str(tmp_path)


def client(**kw) -> TestClient:
    return TestClient(create_app(**kw))


def drain_until_terminal(ws, limit=20000):
    last = None
    for _ in range(limit):
        msg = ws.receive_json()
        if msg["type"] != "telemetry":
            continue
        last = msg
        if msg["status"] != "RUNNING":
            return last
    raise AssertionError("no terminal frame")


def test_healthz_and_scenarios():
    c = client()
    assert c.get("/healthz").json() == {"status": "ok"}
    names = c.get("/scenarios").json()["scenarios"]
    assert "default" in names and "open" in names


def test_map_endpoint_hides_ap():
    c = client()
    doc = c.get("/map/default").json()
    assert "walls" in doc and "bounds" in doc and "symbols" in doc
    assert "ap" not in doc
    debug = client(debug=True).get("/map/default").json()
    assert "ap" in debug


def test_session_times_out_with_final_frame(tiny_dir):
    c = client(scenario_dirs=[tiny_dir])
    with c.websocket_connect("/session?scenario=tiny&seed=1&speed=0") as ws:
        hello = ws.receive_json()
        assert hello["type"] == "hello"
        ws.send_json({"type": "start"})
        last = drain_until_terminal(ws)
        assert last["status"] == "TIMEOUT"
        assert last["t"] == 4.0


def test_control_clamped_and_echoed(tiny_dir):
    c = client(scenario_dirs=[tiny_dir])
    with c.websocket_connect("/session?scenario=tiny&seed=2&speed=0") as ws:
        ws.receive_json()
        ws.send_json({"type": "start"})
        ws.receive_json()
        ws.send_json({"type": "control", "v_forward": 42.0})
        seen = None
        for _ in range(60):
            m = ws.receive_json()
            if m["type"] == "telemetry" and m["applied_control"]["v_forward"] > 0:
                seen = m["applied_control"]
                break
        assert seen is not None
        assert seen["v_forward"] == 0.5  # scenario v_max


def test_no_ground_truth_without_debug(tiny_dir):
    forbidden = {"true_pose", "rss_raw", "doa_body", "doa_camera", "ap", "debug"}
    c = client(scenario_dirs=[tiny_dir])
    with c.websocket_connect("/session?scenario=tiny&seed=3&speed=0") as ws:
        ws.receive_json()
        ws.send_json({"type": "start"})
        for _ in range(40):
            msg = ws.receive_json()
            assert not (set(msg) & forbidden)


def test_debug_mode_includes_truth(tiny_dir):
    c = client(scenario_dirs=[tiny_dir], debug=True)
    with c.websocket_connect("/session?scenario=tiny&seed=3&speed=0") as ws:
        ws.receive_json()
        ws.send_json({"type": "start"})
        msg = ws.receive_json()
        assert "debug" in msg and "true_pose" in msg["debug"]


def test_bar_mode_omits_gradient_fields(tiny_dir):
    c = client(scenario_dirs=[tiny_dir])
    with c.websocket_connect("/session?scenario=tiny&mode=bar&seed=4&speed=0") as ws:
        ws.receive_json()
        ws.send_json({"type": "start"})
        for _ in range(20):
            msg = ws.receive_json()
            assert "bar_segments" not in msg
            assert "rss_percent" in msg


def test_malformed_message_keeps_connection(tiny_dir):
    c = client(scenario_dirs=[tiny_dir])
    with c.websocket_connect("/session?scenario=tiny&seed=5&speed=0") as ws:
        ws.receive_json()
        ws.send_json({"type": "warp", "to": "ap"})
        err = ws.receive_json()
        assert err["type"] == "error"
        ws.send_json({"type": "control", "v_forward": "NaN"})
        err2 = ws.receive_json()
        assert err2["type"] == "error"
        ws.send_json({"type": "start"})
        assert ws.receive_json()["type"] == "telemetry"


def test_second_operator_rejected(tiny_dir):
    c = client(scenario_dirs=[tiny_dir])
    with c.websocket_connect("/session?scenario=tiny&seed=6&speed=1") as ws1:
        ws1.receive_json()
        with c.websocket_connect("/session?scenario=tiny&seed=6") as ws2:
            msg = ws2.receive_json()
            assert msg["type"] == "error"
            assert "operator" in msg["detail"]


def test_unknown_scenario_reported():
    c = client()
    with c.websocket_connect("/session?scenario=nowhere") as ws:
        msg = ws.receive_json()
        assert msg["type"] == "error"


def _finished_log(tmp_path):
    sc = scenario_from_dict(small_scenario_doc(time_limit=2.0))
    s = Session(sc, seed=1)
    while not s.terminal:
        s.tick(FlcCommand(v_forward=0.1))
    path = tmp_path / "log.ndjson"
    write_log(s.log, path)
    return s.log, path


def test_replay_emits_logged_record_count(tmp_path):
    log, _ = _finished_log(tmp_path)
    c = client(replay_log=log)
    with c.websocket_connect("/session?speed=0") as ws:
        hello = ws.receive_json()
        assert hello["replay"] is True
        count = 0
        for _ in range(len(log.records)):
            ws.send_json({"type": "step"})
            msg = ws.receive_json()
            assert msg["type"] == "telemetry"
            count += 1
        assert count == len(log.records)


def test_replay_step_mode_waits_for_steps(tmp_path):
    log, _ = _finished_log(tmp_path)
    c = client(replay_log=log)
    with c.websocket_connect("/session?speed=0") as ws:
        ws.receive_json()
        ws.send_json({"type": "step"})
        first = ws.receive_json()
        ws.send_json({"type": "step"})
        second = ws.receive_json()
        assert second["t"] > first["t"]


def test_reconnect_within_grace_resumes(tiny_dir):
    # paced run so the session is still mid-flight when the operator drops
    c = client(scenario_dirs=[tiny_dir])
    with c.websocket_connect("/session?scenario=tiny&seed=9&speed=2") as ws:
        ws.receive_json()
        ws.send_json({"type": "start"})
        last_t = 0.0
        for _ in range(4):
            m = ws.receive_json()
            if m["type"] == "telemetry":
                last_t = m["t"]
    with c.websocket_connect("/session?scenario=tiny&seed=9&speed=0") as ws2:
        hello = ws2.receive_json()
        assert hello["resumed"] is True
        m = ws2.receive_json()
        assert m["type"] == "telemetry"
        assert m["t"] > last_t


def test_replay_realtime_pacing(tmp_path):
    import time

    log, _ = _finished_log(tmp_path)  # 2 s of session
    c = client(replay_log=log)
    speed = 10.0
    expected = log.records[-1]["t"] / speed
    with c.websocket_connect(f"/session?speed={speed}") as ws:
        ws.receive_json()
        start = time.monotonic()
        for _ in range(len(log.records)):
            ws.receive_json()
        elapsed = time.monotonic() - start
    assert abs(elapsed - expected) < 0.25 * expected + 0.1
