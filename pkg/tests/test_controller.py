import numpy as np
import pytest

from pnpf.controller import (
    ControllerConfig,
    ControllerState,
    PerturbationSchedule,
    init_state,
    rollout,
    safeguard_step,
    step,
    to_pose,
)
from pnpf.energyfields import EnergyField
from pnpf.errors import StuckError
from pnpf.geomath import Trajectory, UnitQuaternion, quat_log_map
from pnpf.model import PnpfModel
from pnpf.nets import FilmMLP
from pnpf.potential import PotentialParams
from pnpf.safeset import SafetySamples
from pnpf.trajgen import select_nominal


def _cfg(**kw):
    base = dict(dt=0.02, grad_tol=0.5, seed=0)
    base.update(kw)
    return ControllerConfig(**base)


def test_rollout_converges_to_nominal_end(line_model):
    m = line_model
    start = m.nominal.point_at_phase(m.s0)
    end = m.nominal.point_at_phase(0.0)
    params = PotentialParams(alpha=m.alpha, goal=(tuple(end), 5.0),
                             goal_threshold=0.05 * m.s0)
    tr = rollout(start, m.s0, m, params, 400, cfg=_cfg(goal_tol=0.02))
    assert np.linalg.norm(tr.x[-1] - end) < 0.05
    assert tr.s[-1] < 0.05 * m.s0


def test_phase_monotone_and_window_bound(line_model):
    m = line_model
    start = m.nominal.point_at_phase(m.s0)
    tr = rollout(start, m.s0, m, PotentialParams(alpha=m.alpha), 400, cfg=_cfg())
    ds = np.diff(tr.s)
    assert np.mean(ds <= 1e-12) >= 0.99
    # forward progress (phase decrease) is window-bounded per step
    assert np.all(ds >= -m.s_w - 1e-12)


def test_velocity_bound_and_descent(line_model):
    m = line_model
    rng = np.random.default_rng(6)
    start = m.nominal.point_at_phase(0.7 * m.s0) + rng.normal(scale=0.03, size=2)
    tr = rollout(start, 0.7 * m.s0, m, PotentialParams(alpha=m.alpha), 200, cfg=_cfg())
    speeds = np.linalg.norm(np.diff(tr.x, axis=0), axis=1) / tr.dt
    assert np.all(speeds <= m.v_max + 1e-9)
    # potential descent between consecutive steps in the pre-terminal region,
    # allowing small numeric slack and safeguard evaluations
    scale = max(abs(tr.phi).max(), 1.0)
    dphi = np.diff(tr.phi)
    ok = dphi <= 1e-4 * scale
    for i, ev in enumerate(tr.events):
        if any(e.startswith("safeguard") for e in ev):
            ok[max(i - 2, 0):i + 1] = True
    active = tr.s[:-1] > 0.05 * m.s0
    assert np.mean(ok[active]) >= 0.99


def test_alpha_zero_is_fixed_point(line_model):
    m = line_model
    cfg = _cfg()
    st = init_state(m.nominal.point_at_phase(0.5 * m.s0), 0.5 * m.s0, cfg)
    st2 = step(st, m, PotentialParams(alpha=0.0), cfg)
    assert np.array_equal(st2.x, st.x)
    assert st2.s == st.s


def test_rollout_determinism(line_model):
    m = line_model
    start = m.nominal.point_at_phase(m.s0) + np.array([0.02, -0.01])
    a = rollout(start, m.s0, m, PotentialParams(alpha=m.alpha), 150, cfg=_cfg(seed=7))
    b = rollout(start, m.s0, m, PotentialParams(alpha=m.alpha), 150, cfg=_cfg(seed=7))
    assert np.array_equal(a.x, b.x) and np.array_equal(a.s, b.s)
    assert np.array_equal(a.phi, b.phi)


def test_backward_teleport_reexecutes_segment(line_model):
    m = line_model
    start = m.nominal.point_at_phase(m.s0)
    # run a few steps, then jump back toward the start of the path; the
    # carried phase now overstates the progress by ~0.35 s0
    back = m.nominal.point_at_phase(0.95 * m.s0) - m.nominal.point_at_phase(0.6 * m.s0)
    sched = PerturbationSchedule(((10, "teleport", back),))
    tr = rollout(start, m.s0, m, PotentialParams(alpha=m.alpha), 500,
                 schedule=sched, cfg=_cfg())
    post = tr.s[11:]
    # phase climbs back up (more of the path remains after the teleport)
    assert post.max() > tr.s[10] + 0.1 * m.s0
    # forward progress stays window-bounded everywhere
    assert np.all(np.diff(tr.s) >= -m.s_w - 1e-12)
    # the re-executed interval is covered with gaps below s_w
    lo, hi = 0.65 * m.s0, 0.9 * m.s0
    seen = np.sort(post[(post >= lo) & (post <= hi)])
    assert len(seen) > 3
    assert np.all(np.diff(seen) < m.s_w)


def test_pause_time_invariance(line_model):
    m = line_model
    start = m.nominal.point_at_phase(m.s0)
    params = PotentialParams(alpha=m.alpha)
    plain = rollout(start, m.s0, m, params, 120, cfg=_cfg())
    paused = rollout(start, m.s0, m, params, 130,
                     schedule=PerturbationSchedule(((10, "pause", 8),)),
                     cfg=_cfg())
    # held rows repeat the state, then the suffix matches the plain run
    assert np.array_equal(paused.x[10], paused.x[18])
    n = min(len(plain.x) - 11, len(paused.x) - 19)
    assert n > 5
    assert np.array_equal(paused.x[19:19 + n], plain.x[11:11 + n])
    assert np.array_equal(paused.s[19:19 + n], plain.s[11:11 + n])


def _flat_model():
    """Untrained fields evaluate to zero everywhere: a perfect plateau."""
    n = 20
    t = np.linspace(0, 1, n)
    demo = Trajectory(np.stack([t, np.zeros(n)], axis=1))
    nom = select_nominal([demo], [demo])
    def f(kind, seed):
        net = FilmMLP(in_dim=2, cond_dim=12, hidden=[8], hyper_hidden=[8], seed=seed)
        return EnergyField(net=net, kind=kind, periodic=False, num_frequencies=6,
                           s_total=nom.s0, x_mean=np.zeros(2), x_scale=1.0,
                           target_mean=0.0, target_scale=1.0, s_range=(0.0, nom.s0))
    samples = SafetySamples(x_in=nom.points, s_in=nom.s,
                            x_out=np.array([[5.0, 5.0], [-5.0, -5.0]]),
                            eps_sdf=0.2, bounds=np.array([[-6.0, 6.0], [-6.0, 6.0]]))
    return PnpfModel(mode="point-to-point", dim=2, nominal=nom,
                     nominal_field=f("nominal", 0), safety_field=f("safety", 1),
                     samples=samples, s_w=0.25, lambda_slope=2.0,
                     alpha=1.0, v_max=1.0)


def test_safeguard_no_improvement_keeps_state():
    m = _flat_model()
    cfg = _cfg(n_fail=100)
    st = init_state([0.5, 0.0], 0.5, cfg)
    out = safeguard_step(st, m, PotentialParams(), cfg)
    assert np.array_equal(out.x, st.x)
    assert out.fail_counter == 1
    assert out.last_events[-1] == "safeguard-no-improvement"


def test_safeguard_stuck_error():
    m = _flat_model()
    cfg = _cfg(n_fail=1)
    st = init_state([0.5, 0.0], 0.5, cfg)
    with pytest.raises(StuckError) as exc:
        safeguard_step(st, m, PotentialParams(), cfg)
    assert exc.value.state.fail_counter == 1


def test_safeguard_escapes_pocket(line_model):
    # start at the endpoint attractor region with a stalled counter: a nearby
    # candidate along the remaining gradient should improve the potential
    m = line_model
    cfg = _cfg(n_fail=100, seed=11)
    st = init_state(m.nominal.point_at_phase(0.5 * m.s0) + np.array([0.0, 0.02]),
                    0.5 * m.s0, cfg)
    out = safeguard_step(st, m, PotentialParams(alpha=m.alpha), cfg)
    assert out.last_events[-1] == "safeguard-fired"
    assert not np.array_equal(out.x, st.x)


def test_rollout_bad_horizon_and_schedule(line_model):
    m = line_model
    with pytest.raises(ValueError):
        rollout([0.0, 0.0], m.s0, m, PotentialParams(), 0)
    with pytest.raises(ValueError):
        PerturbationSchedule(((5, "teleport", [0, 0]), (5, "pause", 3)))


def test_trace_serialization_roundtrip(tmp_path, line_model):
    m = line_model
    tr = rollout(m.nominal.point_at_phase(m.s0), m.s0, m,
                 PotentialParams(alpha=m.alpha), 30, cfg=_cfg())
    csv_path = tmp_path / "trace.csv"
    jsonl_path = tmp_path / "trace.jsonl"
    tr.to_csv(csv_path)
    tr.to_jsonl(jsonl_path)
    import csv as csvmod
    import json
    with open(csv_path) as f:
        rows = list(csvmod.reader(f))
    assert len(rows) == len(tr.s) + 1
    assert float(rows[1][4]) == tr.s[0]
    with open(jsonl_path) as f:
        recs = [json.loads(line) for line in f]
    assert recs[5]["s"] == tr.s[5]
    assert recs[5]["x"] == list(tr.x[5])


def test_to_pose_identity_and_roundtrip():
    q_ref = UnitQuaternion(0.5, 0.5, 0.5, 0.5)
    pos, q = to_pose([1.0, 2.0, 3.0, 0.0, 0.0, 0.0], q_ref)
    assert np.array_equal(pos, [1.0, 2.0, 3.0])
    assert q == q_ref
    rng = np.random.default_rng(12)
    for _ in range(50):
        v = rng.normal(size=4)
        v /= np.linalg.norm(v)
        q_t = UnitQuaternion(*v)
        r = quat_log_map(q_t, q_ref)
        _, q_back = to_pose(np.concatenate([[0, 0, 0], r]), q_ref)
        d = np.array([q_back.w - q_t.w, q_back.x - q_t.x,
                      q_back.y - q_t.y, q_back.z - q_t.z])
        assert np.linalg.norm(d) < 1e-6
    with pytest.raises(ValueError):
        to_pose([1.0, 2.0, 3.0, 0.0], q_ref)
