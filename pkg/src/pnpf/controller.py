"""Closed-loop control on the learned potential: gradient steps with a
velocity cap, windowed phase re-estimation, a sampling safeguard for stalls,
and rollout orchestration with scripted perturbations."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .energyfields import eval_field
from .errors import StuckError
from .geomath import UnitQuaternion, quat_exp_map
from .model import PnpfModel
from .potential import PotentialParams, compose, compose_periodic

__all__ = [
    "ControllerConfig",
    "ControllerState",
    "PerturbationSchedule",
    "RolloutTrace",
    "init_state",
    "step",
    "step_periodic",
    "safeguard_step",
    "rollout",
    "to_pose",
]


@dataclass
class ControllerConfig:
    dt: float = 0.02  # 50 Hz
    delta_stall_frac: float = 1e-4  # stall threshold, fraction of s0
    n_stall: int = 10  # consecutive small-decrease steps before the safeguard
    n_cand: int = 64  # safeguard candidate directions
    n_fail: int = 25  # consecutive fruitless safeguard rounds before giving up
    termination_frac: float = 0.01  # terminate below this fraction of s0
    grad_tol: float = 1e-2  # gradient norm at termination, phase units/state unit
    goal_tol: float = 0.0  # goal ball radius; 0 disables the goal stop rule
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass
class ControllerState:
    x: np.ndarray
    s: float
    step_count: int = 0
    stall_counter: int = 0
    fail_counter: int = 0
    terminated: bool = False
    last_events: list = field(default_factory=list)
    last_phi: float | None = None
    best_phi: float | None = None  # running best, reset on perturbations
    rng: np.random.Generator | None = None


def init_state(x0, s_init: float, cfg: ControllerConfig) -> ControllerState:
    return ControllerState(x=np.asarray(x0, dtype=float).copy(), s=float(s_init),
                           rng=np.random.default_rng(cfg.seed))


@dataclass(frozen=True)
class PerturbationSchedule:
    """Scripted disturbances: (step index, kind, payload).

    kinds: "teleport" (payload: delta x), "frame-shift" (payload: frame
    delta), "pause" (payload: hold count).  Step indices strictly increasing.
    """

    items: tuple = ()

    def __post_init__(self):
        idx = [it[0] for it in self.items]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("schedule step indices must be strictly increasing")


def _compose_at(x, s, model: PnpfModel, params: PotentialParams):
    if model.mode == "periodic":
        return compose_periodic(x, s, model, params)
    return compose(x, s, model, params)


def _check_termination(state: ControllerState, model: PnpfModel,
                       params: PotentialParams, cfg: ControllerConfig,
                       grad_norm: float) -> bool:
    if params.goal is not None and cfg.goal_tol > 0:
        g_state = np.asarray(params.goal[0], dtype=float)
        if np.linalg.norm(state.x - g_state) < cfg.goal_tol:
            return True
    if model.mode == "periodic":
        return state.s < 0.0 and grad_norm < cfg.grad_tol
    return state.s < cfg.termination_frac * model.s0 and grad_norm < cfg.grad_tol


def _gradient_move(x, grad, params: PotentialParams, model: PnpfModel, dt: float):
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite potential gradient")
    v = -params.alpha * grad
    speed = float(np.linalg.norm(v))
    if speed > model.v_max:
        v = v * (model.v_max / speed)
    return x + v * dt


def safeguard_step(state: ControllerState, model: PnpfModel,
                   params: PotentialParams, cfg: ControllerConfig,
                   dt: float | None = None) -> ControllerState:
    """Sampling fallback for stalls: try n_cand one-step moves of magnitude
    v_max*dt and keep the best one only if it beats staying put."""
    dt = cfg.dt if dt is None else dt
    rng = state.rng if state.rng is not None else np.random.default_rng(cfg.seed)
    d = len(state.x)
    dirs = rng.normal(size=(cfg.n_cand, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    cand = state.x + model.v_max * dt * dirs
    phi_c = _compose_at(cand, np.full(cfg.n_cand, state.s), model, params).phi
    phi_stay = _compose_at(state.x, state.s, model, params).phi
    best = int(np.argmin(phi_c))
    if phi_c[best] < phi_stay:
        return replace(state, x=cand[best], stall_counter=0, fail_counter=0,
                       last_events=state.last_events + ["safeguard-fired"])
    new = replace(state, fail_counter=state.fail_counter + 1,
                  last_events=state.last_events + ["safeguard-no-improvement"])
    if new.fail_counter >= cfg.n_fail:
        raise StuckError(
            f"no improving candidate for {new.fail_counter} safeguard rounds "
            f"at s={state.s:.4g}", state=new)
    return new


def _stall_update(state: ControllerState, phi_new: float,
                  delta_stall: float) -> tuple[int, float]:
    """Stalled when the potential has not improved on its running best by at
    least delta_stall; catches flat stretches and overshoot oscillations."""
    if state.best_phi is None or phi_new < state.best_phi - delta_stall:
        return 0, phi_new if state.best_phi is None else min(state.best_phi, phi_new)
    return state.stall_counter + 1, state.best_phi


def _reestimate_phase(x_new, s_prev: float, model: PnpfModel) -> tuple[float, bool]:
    """Closed-loop phase: nominal field at the new state, conditioned on the
    previous phase, clamped to the [s - s_w, s + s_w] window."""
    raw, _ = eval_field(model.nominal_field, x_new, s_prev)
    lo, hi = s_prev - model.s_w, s_prev + model.s_w
    clamped = raw < lo or raw > hi
    return float(np.clip(raw, lo, hi)), clamped


def step(state: ControllerState, model: PnpfModel, params: PotentialParams,
         cfg: ControllerConfig, dt: float | None = None) -> ControllerState:
    """One point-to-point control step: gradient descent on the composed
    potential, then windowed phase re-estimation at the new state."""
    dt = cfg.dt if dt is None else dt
    comp = compose(state.x, state.s, model, params)
    events = []
    if comp.inside_obstacle:
        events.append("obstacle-contact")
    x_new = _gradient_move(state.x, comp.grad, params, model, dt)
    if np.array_equal(x_new, state.x):
        s_new, clamped = state.s, False  # zero step keeps the projection
    else:
        s_new, clamped = _reestimate_phase(x_new, state.s, model)
    if clamped:
        events.append("clamped-phase")
    phi_new = float(_compose_at(x_new, s_new, model, params).phi)
    counter, best = _stall_update(state, phi_new, cfg.delta_stall_frac * model.s0)
    new = replace(state, x=x_new, s=s_new, step_count=state.step_count + 1,
                  stall_counter=counter, last_events=events, last_phi=phi_new,
                  best_phi=best)
    grad_norm = float(np.linalg.norm(comp.grad))
    if _check_termination(new, model, params, cfg, grad_norm):
        return replace(new, terminated=True)
    if new.stall_counter >= cfg.n_stall:
        new = safeguard_step(new, model, params, cfg, dt)
        if new.last_events and new.last_events[-1].startswith("safeguard"):
            events = events + [new.last_events[-1]]
            new = replace(new, last_events=events, last_phi=None)
    return new


def step_periodic(state: ControllerState, model: PnpfModel,
                  params: PotentialParams, cfg: ControllerConfig,
                  dt: float | None = None) -> ControllerState:
    """One periodic control step; the phase decreases by the nominal-energy
    decrement between the old and new state, and may go negative."""
    if model.mode != "periodic":
        raise ValueError("step_periodic requires a periodic model")
    dt = cfg.dt if dt is None else dt
    comp = compose_periodic(state.x, state.s, model, params)
    events = []
    if comp.inside_obstacle:
        events.append("obstacle-contact")
    x_new = _gradient_move(state.x, comp.grad, params, model, dt)
    if state.s >= 0.0 and not np.array_equal(x_new, state.x):
        before, _ = eval_field(model.nominal_field, state.x, state.s)
        after, _ = eval_field(model.nominal_field, x_new, state.s)
        s_new = state.s - (float(before) - float(after))
    else:
        s_new = state.s  # settled on the safety-only branch
    phi_new = float(compose_periodic(x_new, s_new, model, params).phi)
    counter, best = _stall_update(state, phi_new, cfg.delta_stall_frac * model.s0)
    new = replace(state, x=x_new, s=s_new, step_count=state.step_count + 1,
                  stall_counter=counter, last_events=events, last_phi=phi_new,
                  best_phi=best)
    grad_norm = float(np.linalg.norm(comp.grad))
    if _check_termination(new, model, params, cfg, grad_norm):
        return replace(new, terminated=True)
    if new.stall_counter >= cfg.n_stall and new.s >= 0.0:
        new = safeguard_step(new, model, params, cfg, dt)
        new = replace(new, last_phi=None)
    return new


@dataclass
class RolloutTrace:
    x: np.ndarray  # (T+1, d), includes the initial state
    s: np.ndarray  # (T+1,)
    phi_nom: np.ndarray
    phi_safe: np.ndarray
    phi: np.ndarray
    grad_norm: np.ndarray
    events: list  # per-row list of event strings
    dt: float
    terminated: bool

    def __len__(self):
        return len(self.s)

    def to_csv(self, path):
        d = self.x.shape[1]
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["step", "t"] + [f"x{j}" for j in range(d)]
                       + ["s", "phi_nom", "phi_safe", "phi", "grad_norm", "event"])
            for i in range(len(self.s)):
                row = [i, i * self.dt, *self.x[i], self.s[i], self.phi_nom[i],
                       self.phi_safe[i], self.phi[i], self.grad_norm[i]]
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]]
                           + [";".join(self.events[i])])

    def to_jsonl(self, path):
        with open(path, "w") as f:
            for i in range(len(self.s)):
                f.write(json.dumps({
                    "step": i, "t": i * self.dt, "x": list(self.x[i]),
                    "s": self.s[i], "phi_nom": self.phi_nom[i],
                    "phi_safe": self.phi_safe[i], "phi": self.phi[i],
                    "grad_norm": self.grad_norm[i], "events": self.events[i],
                }) + "\n")


def _apply_perturbation(state: ControllerState, kind: str, payload,
                        frame_offset: np.ndarray) -> tuple[ControllerState, np.ndarray, int]:
    """Returns (state, frame_offset, hold_steps)."""
    if kind == "teleport":
        return replace(state, x=state.x + np.asarray(payload, dtype=float),
                       last_phi=None, best_phi=None, stall_counter=0), frame_offset, 0
    if kind == "frame-shift":
        # moving the task frame by delta is, in model coordinates, moving the
        # state the opposite way
        delta = np.asarray(payload, dtype=float)
        return replace(state, last_phi=None, best_phi=None,
                       stall_counter=0), frame_offset + delta, 0
    if kind == "pause":
        return state, frame_offset, int(payload)
    raise ValueError(f"unknown perturbation kind: {kind}")


def rollout(x0, s_init: float, model: PnpfModel, params: PotentialParams,
            horizon: int, schedule: PerturbationSchedule | None = None,
            cfg: ControllerConfig | None = None) -> RolloutTrace:
    """Run up to `horizon` closed-loop steps, injecting scheduled
    perturbations before the step at their index.  World coordinates in the
    trace; frame shifts move the model relative to the world."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    cfg = cfg or ControllerConfig()
    schedule = schedule or PerturbationSchedule()
    state = init_state(x0, s_init, cfg)
    step_fn = step_periodic if model.mode == "periodic" else step
    frame_offset = np.zeros(len(state.x))
    pending = list(schedule.items)
    xs, ss, pn, pf, pv, gn, ev = [], [], [], [], [], [], []

    def record(st: ControllerState, events):
        comp = _compose_at(st.x, st.s, model, params)
        xs.append(st.x + frame_offset)
        ss.append(st.s)
        pn.append(float(np.asarray(comp.phi_nominal)))
        pf.append(float(comp.phi_safety))
        pv.append(float(comp.phi))
        gn.append(float(np.linalg.norm(comp.grad)))
        ev.append(list(events))

    record(state, [])
    i = 0
    hold = 0
    while i < horizon and not state.terminated:
        events = []
        while pending and pending[0][0] == i:
            _, kind, payload = pending.pop(0)
            if kind == "frame-shift":
                # keep the world position fixed while the model frame moves
                delta = np.asarray(payload, dtype=float)
                state = replace(state, x=state.x - delta, last_phi=None,
                                best_phi=None, stall_counter=0)
                frame_offset = frame_offset + delta
            else:
                state, frame_offset, h = _apply_perturbation(
                    state, kind, payload, frame_offset)
                hold = max(hold, h)
            events.append(f"perturbation:{kind}")
        if hold > 0:
            hold -= 1
            i += 1
            record(state, events + ["paused"])
            continue
        state = step_fn(state, model, params, cfg)
        record(state, events + state.last_events)
        i += 1
    return RolloutTrace(x=np.array(xs), s=np.array(ss), phi_nom=np.array(pn),
                        phi_safe=np.array(pf), phi=np.array(pv),
                        grad_norm=np.array(gn), events=ev, dt=cfg.dt,
                        terminated=state.terminated)


def to_pose(x, q_ref: UnitQuaternion, position_block=slice(0, 3),
            orientation_block=slice(3, 6)):
    """Map a state with an axis-angle orientation block to (position,
    quaternion): q = Exp(r) * q_ref."""
    x = np.asarray(x, dtype=float)
    r = x[orientation_block]
    if len(r) != 3:
        raise ValueError("orientation block must have 3 components")
    return x[position_block].copy(), quat_exp_map(r, q_ref)
