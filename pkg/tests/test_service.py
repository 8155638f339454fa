import json

import numpy as np
import pytest

from pnpf.controller import ControllerConfig, PerturbationSchedule, rollout
from pnpf.potential import PotentialParams
from pnpf.service import PROTOCOL_VERSION, SessionCore, create_app, safe_contour


def _core(model, **cfg_kw):
    cfg_kw.setdefault("grad_tol", 0.5)
    return SessionCore(model, cfg=ControllerConfig(**cfg_kw))


def _start(core, model, frac=1.0):
    x = model.nominal.point_at_phase(frac * model.s0)
    [ack] = core.handle({"type": "set-start", "payload": {"x": list(x)},
                         "client_tag": "t0"})
    return x, ack


def test_hello_and_initial_frame(line_model):
    core = _core(line_model)
    hello = core.hello()
    assert hello["type"] == "hello" and hello["version"] == PROTOCOL_VERSION
    assert hello["model"]["dim"] == 2
    assert len(hello["nominal"]) == len(line_model.nominal.core_points)
    x, ack = _start(core, line_model)
    assert ack["type"] == "ack" and ack["client_tag"] == "t0"
    frame = ack["frame"]
    assert frame["step"] == 0
    assert frame["x"] == [float(v) for v in x]
    assert frame["s"] == line_model.s0


def test_tick_requires_start_and_running(line_model):
    core = _core(line_model)
    assert core.tick() is None  # no state yet
    _start(core, line_model)
    assert core.tick() is None  # not running
    [err] = core.handle({"type": "start"})
    assert err["type"] == "ack"
    frame = core.tick()
    assert frame is not None and frame["step"] == 1
    core.handle({"type": "pause"})
    assert core.tick() is None


def test_ticks_match_offline_rollout_bitwise(line_model):
    m = line_model
    core = _core(m)
    start, _ = _start(core, m)
    [reply] = core.handle({"type": "step", "payload": {"n": 25}})
    frames = reply["frames"]
    tr = rollout(start, m.s0, m, PotentialParams(alpha=m.alpha), 25,
                 cfg=ControllerConfig(grad_tol=0.5))
    assert len(frames) == 25
    for k, fr in enumerate(frames, start=1):
        assert fr["x"] == [float(v) for v in tr.x[k]]
        assert fr["s"] == float(tr.s[k])
        assert fr["phi"] == float(tr.phi[k])


def test_teleport_log_replays_bitwise(line_model):
    m = line_model
    core = _core(m)
    start, _ = _start(core, m)
    core.handle({"type": "step", "payload": {"n": 10}})
    delta = m.nominal.point_at_phase(0.95 * m.s0) - m.nominal.point_at_phase(0.6 * m.s0)
    core.handle({"type": "teleport", "payload": {"delta": list(delta)}})
    [reply] = core.handle({"type": "step", "payload": {"n": 40}})
    assert "perturbation:teleport" in reply["frames"][0]["events"]
    [log] = core.handle({"type": "export-log"})
    assert log["type"] == "log"
    sched = PerturbationSchedule(tuple((i, k, np.asarray(p))
                                      for i, k, p in log["schedule"]))
    assert sched.items[0][0] == 10
    tr = rollout(start, m.s0, m, PotentialParams(alpha=m.alpha), 50,
                 schedule=sched, cfg=ControllerConfig(grad_tol=0.5))
    # the session frames equal the offline trace rows, including the jump
    for k, fr in enumerate(reply["frames"], start=11):
        assert fr["x"] == [float(v) for v in tr.x[k]]
        assert fr["s"] == float(tr.s[k])


def test_frame_shift_keeps_world_coordinates(line_model):
    m = line_model
    core = _core(m)
    start, _ = _start(core, m)
    core.handle({"type": "step", "payload": {"n": 5}})
    [before] = core.handle({"type": "step", "payload": {"n": 1}})
    delta = np.array([0.1, -0.05])
    core.handle({"type": "shift-frame", "payload": {"delta": list(delta)}})
    [after] = core.handle({"type": "step", "payload": {"n": 1}})
    fr = after["frames"][0]
    assert "perturbation:frame-shift" in fr["events"]
    # world position moves by one control step, not by the frame delta
    jump = np.array(fr["x"]) - np.array(before["frames"][0]["x"])
    assert np.linalg.norm(jump) <= m.v_max * core.cfg.dt + 1e-9


def test_obstacle_and_goal_commands(line_model):
    core = _core(line_model)
    _start(core, line_model)
    [ack] = core.handle({"type": "add-obstacle",
                         "payload": {"center": [0.5, 0.1], "radius": 0.05}})
    oid = ack["obstacle_id"]
    assert len(core.params.obstacles) == 1
    [ack2] = core.handle({"type": "move-obstacle",
                          "payload": {"id": oid, "center": [0.4, 0.1]}})
    assert ack2["type"] == "ack"
    assert core.params.obstacles[0].center == (0.4, 0.1)
    core.handle({"type": "set-goal", "payload": {"position": [1.0, 0.0],
                                                 "strength": 2.0}})
    assert core.params.goal == ((1.0, 0.0), 2.0)
    core.handle({"type": "set-goal", "payload": {"position": None}})
    assert core.params.goal is None
    [ack3] = core.handle({"type": "remove-obstacle", "payload": {"id": oid}})
    assert core.params.obstacles == []
    [err] = core.handle({"type": "remove-obstacle", "payload": {"id": oid}})
    assert err["type"] == "error"


def test_set_phase_and_contour(line_model):
    m = line_model
    core = _core(m)
    _start(core, m)
    [reply] = core.handle({"type": "set-phase", "payload": {"s": 0.5 * m.s0}})
    assert reply["frame"]["s"] == 0.5 * m.s0
    [cont] = core.handle({"type": "get-contour", "client_tag": "c1"})
    assert cont["type"] == "contour" and cont["client_tag"] == "c1"
    pts = np.array(cont["points"])
    assert pts.shape == (64, 2)
    # the contour stays within the sampled workspace
    assert np.all(pts[:, 0] >= m.samples.bounds[0, 0] - 1.0)


def test_error_frames_keep_session_alive(line_model):
    core = _core(line_model)
    [e1] = core.handle({"type": "teleport", "payload": {"delta": [1, 0]}})
    assert e1["type"] == "error" and "set-start" in e1["message"]
    [e2] = core.handle({"type": "warp-drive", "client_tag": "z"})
    assert e2["type"] == "error" and e2["client_tag"] == "z"
    [e3] = core.handle({"no_type": True})
    assert e3["type"] == "error"
    _start(core, line_model)
    [e4] = core.handle({"type": "teleport", "payload": {"delta": [1, 2, 3]}})
    assert e4["type"] == "error" and "components" in e4["message"]
    # still usable afterwards
    [ok] = core.handle({"type": "step"})
    assert ok["type"] == "frames"


def test_contour_encloses_tube(line_model):
    m = line_model
    pts = safe_contour(m, 0.5 * m.s0)
    center = m.nominal.point_at_phase(0.5 * m.s0)
    radii = np.linalg.norm(pts - center, axis=1)
    # the zero set extends at least a good part of eps_sdf around the path
    assert np.median(radii) > 0.2 * m.samples.eps_sdf
    with pytest.raises(ValueError):
        safe_contour(_fake_3d(m), 1.0)


def _fake_3d(m):
    import dataclasses
    return dataclasses.replace(m, dim=3)


def test_websocket_session_stream(line_model):
    from starlette.testclient import TestClient

    app = create_app(line_model, tick_rate=200.0)
    start = line_model.nominal.point_at_phase(line_model.s0)
    with TestClient(app) as client:
        with client.websocket_connect("/session") as ws:
            hello = json.loads(ws.receive_text())
            assert hello["type"] == "hello"
            ws.send_text(json.dumps({"type": "set-start",
                                     "payload": {"x": list(start)},
                                     "client_tag": "a"}))
            ack = json.loads(ws.receive_text())
            assert ack["type"] == "ack" and ack["client_tag"] == "a"
            ws.send_text("this is not json")
            err = json.loads(ws.receive_text())
            assert err["type"] == "error" and err["code"] == "BadJSON"
            ws.send_text(json.dumps({"type": "start", "client_tag": "b"}))
            got_ack = False
            frames = []
            while len(frames) < 5:
                msg = json.loads(ws.receive_text())
                if msg["type"] == "ack":
                    got_ack = True
                elif msg["type"] == "state":
                    frames.append(msg)
            assert got_ack
            assert [f["step"] for f in frames] == list(range(1, 6))
            ws.send_text(json.dumps({"type": "pause", "client_tag": "c"}))
            # drain until the pause ack; afterwards the stream is silent
            while True:
                msg = json.loads(ws.receive_text())
                if msg["type"] == "ack" and msg["client_tag"] == "c":
                    break


def test_two_sessions_are_independent(line_model):
    from starlette.testclient import TestClient

    app = create_app(line_model, tick_rate=100.0)
    start = line_model.nominal.point_at_phase(line_model.s0)
    with TestClient(app) as client:
        with client.websocket_connect("/session") as w1, \
                client.websocket_connect("/session") as w2:
            json.loads(w1.receive_text())
            json.loads(w2.receive_text())
            w1.send_text(json.dumps({"type": "set-start",
                                     "payload": {"x": list(start)}}))
            a1 = json.loads(w1.receive_text())
            assert a1["type"] == "ack"
            # session 2 has no state: commands that need one fail there
            w2.send_text(json.dumps({"type": "step"}))
            e2 = json.loads(w2.receive_text())
            assert e2["type"] == "error"
