"""Streaming session service: one live controller per WebSocket connection,
ticked at a fixed rate, with asynchronous commands applied between ticks."""

from __future__ import annotations

import asyncio
import json
import time
from dataclasses import replace

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .controller import (
    ControllerConfig,
    init_state,
    step,
    step_periodic,
)
from .energyfields import eval_field
from .errors import PnpfError, StuckError
from .model import PnpfModel
from .potential import Obstacle, PotentialParams
from .controller import _compose_at  # same evaluation path as rollout

__all__ = ["PROTOCOL_VERSION", "SessionCore", "create_app", "serve",
           "safe_contour"]

PROTOCOL_VERSION = 1


def safe_contour(model: PnpfModel, s: float, n_rays: int = 64,
                 tol: float = 1e-3, r_max: float | None = None) -> np.ndarray:
    """Approximate boundary of the zero set of the safety energy at phase s
    (2D only): bisection along rays from the windowed nominal point."""
    if model.dim != 2:
        raise ValueError("contours are only computed for 2D models")
    center = model.nominal.point_at_phase(float(np.clip(s, 0.0, model.s0)))
    if r_max is None:
        ext = model.samples.bounds[:, 1] - model.samples.bounds[:, 0]
        r_max = 0.5 * float(np.linalg.norm(ext))
    angles = np.linspace(0.0, 2 * np.pi, n_rays, endpoint=False)
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    lo = np.zeros(n_rays)
    hi = np.full(n_rays, r_max)
    vals_hi, _ = eval_field(model.safety_field, center + dirs * hi[:, None],
                            np.full(n_rays, s))
    hi = np.where(vals_hi > tol, hi, 0.0)  # ray never leaves the zero set
    for _ in range(24):
        mid = 0.5 * (lo + hi)
        vals, _ = eval_field(model.safety_field, center + dirs * mid[:, None],
                             np.full(n_rays, s))
        inside = vals <= tol
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return center + dirs * lo[:, None]


class SessionCore:
    """Transport-independent session logic: commands in, frames out.

    Ticking reuses the controller's step functions on the same code path as
    the offline rollout, so a session's teleport/frame-shift log replayed as
    a PerturbationSchedule reproduces the trace bitwise.
    """

    def __init__(self, model: PnpfModel, cfg: ControllerConfig | None = None,
                 params: PotentialParams | None = None):
        self.model = model
        self.cfg = cfg or ControllerConfig()
        self.params = params or PotentialParams(alpha=model.alpha)
        self.state = None
        self.running = False
        self.steps = 0
        self.frame_offset = np.zeros(model.dim)
        self.pending = []  # queued (kind, payload) applied before the next tick
        self.log = []  # applied (step, kind, payload)
        self._start_args = None
        self._next_obstacle_id = 0
        self._obstacles = {}  # id -> Obstacle
        self._step_fn = step_periodic if model.mode == "periodic" else step

    # -- command handling ---------------------------------------------------

    def hello(self) -> dict:
        m = self.model
        return {"type": "hello", "version": PROTOCOL_VERSION,
                "model": {"mode": m.mode, "dim": m.dim, "s0": m.s0,
                          "s_w": m.s_w, "alpha": m.alpha, "v_max": m.v_max,
                          "s_period": m.s_period,
                          "bounds": m.samples.bounds.tolist()},
                "nominal": m.nominal.core_points.tolist(),
                "tick_dt": self.cfg.dt}

    def handle(self, msg: dict) -> list:
        tag = msg.get("client_tag")
        try:
            if not isinstance(msg, dict) or "type" not in msg:
                raise PnpfError("message needs a 'type' field")
            out = self._dispatch(msg.get("type"), msg.get("payload") or {})
            ack = {"type": "ack", "command": msg["type"], "client_tag": tag}
            if isinstance(out, dict) and out.get("type"):  # full reply frame
                return [dict(out, client_tag=tag)]
            if isinstance(out, dict):
                ack.update(out)
            return [ack]
        except (PnpfError, ValueError, KeyError, TypeError) as e:
            return [{"type": "error", "code": type(e).__name__,
                     "message": str(e), "client_tag": tag}]

    def _require_state(self):
        if self.state is None:
            raise PnpfError("no session state: send set-start first")

    def _dispatch(self, kind: str, payload: dict):
        m = self.model
        if kind == "set-start":
            x = np.asarray(payload["x"], dtype=float)
            if x.shape != (m.dim,):
                raise PnpfError(f"start state must have {m.dim} components")
            s = float(payload.get("s", m.s_period if m.mode == "periodic"
                                  else m.s0))
            self._start_args = (x.copy(), s)
            self._reset()
            return {"frame": self._frame([])}
        if kind == "start":
            self._require_state()
            self.running = True
            return None
        if kind == "pause":
            self.running = False
            return None
        if kind == "reset":
            if self._start_args is None:
                raise PnpfError("nothing to reset: no set-start yet")
            self._reset()
            return {"frame": self._frame([])}
        if kind in ("teleport", "shift-frame"):
            self._require_state()
            delta = np.asarray(payload["delta"], dtype=float)
            if delta.shape != (m.dim,):
                raise PnpfError(f"delta must have {m.dim} components")
            self.pending.append(
                ("frame-shift" if kind == "shift-frame" else "teleport",
                 delta))
            return None
        if kind == "set-phase":
            self._require_state()
            self.state = replace(self.state, s=float(payload["s"]),
                                 last_phi=None, best_phi=None, stall_counter=0)
            return {"frame": self._frame(["set-phase"])}
        if kind == "set-goal":
            if payload.get("position") is None:
                self.params = replace(self.params, goal=None)
            else:
                pos = tuple(float(v) for v in payload["position"])
                self.params = replace(
                    self.params,
                    goal=(pos, float(payload.get("strength", 1.0))),
                    goal_threshold=float(payload.get(
                        "threshold", self.params.goal_threshold)))
            return None
        if kind == "add-obstacle":
            ob = Obstacle(center=tuple(float(v) for v in payload["center"]),
                          radius=float(payload["radius"]),
                          strength=float(payload.get("strength", 1.0)))
            oid = self._next_obstacle_id
            self._next_obstacle_id += 1
            self._obstacles[oid] = ob
            self._sync_obstacles()
            return {"obstacle_id": oid}
        if kind == "move-obstacle":
            oid = int(payload["id"])
            if oid not in self._obstacles:
                raise PnpfError(f"no obstacle with id {oid}")
            ob = self._obstacles[oid]
            self._obstacles[oid] = Obstacle(
                center=tuple(float(v) for v in payload["center"]),
                radius=float(payload.get("radius", ob.radius)),
                strength=ob.strength)
            self._sync_obstacles()
            return None
        if kind == "remove-obstacle":
            oid = int(payload["id"])
            if oid not in self._obstacles:
                raise PnpfError(f"no obstacle with id {oid}")
            del self._obstacles[oid]
            self._sync_obstacles()
            return None
        if kind == "get-contour":
            self._require_state()
            s = float(payload.get("s", self.state.s))
            pts = safe_contour(m, s)
            return {"type": "contour", "s": s, "points": pts.tolist()}
        if kind == "export-log":
            return {"type": "log", "version": PROTOCOL_VERSION,
                    "schedule": [[i, k, np.asarray(p).tolist()]
                                 for i, k, p in self.log]}
        if kind == "step":
            self._require_state()
            n = int(payload.get("n", 1))
            frames = []
            for _ in range(n):
                fr = self.tick(force=True)
                if fr is None:
                    break
                frames.append(fr)
            return {"type": "frames", "frames": frames}
        raise PnpfError(f"unknown command: {kind}")

    def _reset(self):
        x, s = self._start_args
        self.state = init_state(x, s, self.cfg)
        self.running = False
        self.steps = 0
        self.frame_offset = np.zeros(self.model.dim)
        self.pending = []
        self.log = []

    def _sync_obstacles(self):
        self.params = replace(
            self.params,
            obstacles=[self._obstacles[k] for k in sorted(self._obstacles)])

    # -- ticking ------------------------------------------------------------

    def _frame(self, events) -> dict:
        st = self.state
        comp = _compose_at(st.x, st.s, self.model, self.params)
        return {"type": "state", "step": self.steps,
                "x": [float(v) for v in st.x + self.frame_offset],
                "s": float(st.s),
                "phi_nom": float(np.asarray(comp.phi_nominal)),
                "phi_safe": float(comp.phi_safety),
                "phi": float(comp.phi),
                "grad": [float(v) for v in np.asarray(comp.grad)],
                "events": list(events),
                "terminated": bool(st.terminated)}

    def tick(self, force: bool = False) -> dict | None:
        """Advance one control step; None when there is nothing to do."""
        if self.state is None or self.state.terminated:
            return None
        if not (self.running or force):
            return None
        events = []
        # mirror the offline rollout: perturbations land before the step
        for kind, delta in self.pending:
            if kind == "teleport":
                self.state = replace(self.state, x=self.state.x + delta,
                                     last_phi=None, best_phi=None,
                                     stall_counter=0)
            else:  # frame-shift: the model frame moves, the world point stays
                self.state = replace(self.state, x=self.state.x - delta,
                                     last_phi=None, best_phi=None,
                                     stall_counter=0)
                self.frame_offset = self.frame_offset + delta
            self.log.append((self.steps, kind, delta))
            events.append(f"perturbation:{kind}")
        self.pending = []
        try:
            self.state = self._step_fn(self.state, self.model, self.params,
                                       self.cfg)
        except StuckError as e:
            self.running = False
            return {"type": "error", "code": "StuckError", "message": str(e),
                    "step": self.steps}
        self.steps += 1
        frame = self._frame(events + self.state.last_events)
        if self.state.terminated:
            self.running = False
        return frame


def create_app(model: PnpfModel, tick_rate: float = 50.0,
               cfg: ControllerConfig | None = None):
    """FastAPI app exposing one controller session per WebSocket connection."""
    if tick_rate <= 0:
        raise ValueError("tick_rate must be positive")
    cfg = cfg or ControllerConfig(dt=1.0 / tick_rate)
    period = 1.0 / tick_rate
    app = FastAPI(title="pnpf session service")

    @app.websocket("/session")
    async def session_ws(ws: WebSocket):
        await ws.accept()
        core = SessionCore(model, cfg=cfg)
        await ws.send_text(json.dumps(core.hello()))
        deadline = time.monotonic() + period
        try:
            while True:
                if core.running:
                    wait = deadline - time.monotonic()
                    if wait <= 0:
                        frame = core.tick()
                        if frame is not None:
                            await ws.send_text(json.dumps(frame))
                        deadline += period
                        continue
                else:
                    wait = None
                    deadline = time.monotonic() + period
                try:
                    raw = await asyncio.wait_for(ws.receive_text(), wait)
                except asyncio.TimeoutError:
                    continue
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError as e:
                    await ws.send_text(json.dumps(
                        {"type": "error", "code": "BadJSON", "message": str(e)}))
                    continue
                for reply in core.handle(msg):
                    await ws.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass

    return app


def serve(model: PnpfModel, port: int, tick_rate: float = 50.0,
          host: str = "127.0.0.1"):  # pragma: no cover - manual entry point
    import uvicorn
    uvicorn.run(create_app(model, tick_rate=tick_rate), host=host, port=port,
                log_level="warning")
