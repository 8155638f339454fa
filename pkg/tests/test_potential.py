import numpy as np
import pytest

from pnpf.energyfields import EnergyField
from pnpf.geomath import Trajectory
from pnpf.model import PnpfModel
from pnpf.nets import FilmMLP
from pnpf.potential import (
    Obstacle,
    PotentialParams,
    compose,
    compose_periodic,
    lambda_safety,
    obstacle_goal_terms,
)
from pnpf.safeset import SafetySamples
from pnpf.trajgen import select_nominal


def _field(kind, seed, target_mean=0.0, periodic=False, s_total=1.0):
    net = FilmMLP(in_dim=2, cond_dim=24 if periodic else 12,
                  hidden=[16], hyper_hidden=[8], seed=seed)
    rng = np.random.default_rng(seed + 100)
    for k in net.params:
        net.params[k] = rng.normal(scale=0.3, size=net.params[k].shape)
    return EnergyField(net=net, kind=kind, periodic=periodic, num_frequencies=6,
                       s_total=s_total, x_mean=np.zeros(2), x_scale=1.0,
                       target_mean=target_mean, target_scale=1.0,
                       s_range=(0.0, s_total))


def _toy_model(periodic=False):
    n = 40
    t = np.linspace(0, 1, n)
    demo = Trajectory(np.stack([t, np.zeros(n)], axis=1))
    nom = select_nominal([demo], [demo])
    samples = SafetySamples(x_in=nom.points, s_in=nom.s,
                            x_out=np.array([[0.5, 2.0], [0.5, -2.0]]),
                            eps_sdf=0.2, bounds=np.array([[-1.0, 2.0], [-2.0, 2.0]]))
    s_total = nom.s0 if not periodic else 1.0
    return PnpfModel(
        mode="periodic" if periodic else "point-to-point", dim=2, nominal=nom,
        nominal_field=_field("nominal", 1, periodic=periodic, s_total=s_total),
        safety_field=_field("safety", 2, target_mean=5.0, periodic=periodic,
                            s_total=s_total),
        samples=samples, s_w=0.25 * nom.s0, lambda_slope=2.0, alpha=1.0, v_max=1.0)


def test_lambda_safety_reference_values():
    s0 = 2.0
    assert lambda_safety(0.0, s0) == 2.0
    assert lambda_safety(0.5 * s0, s0) == pytest.approx(1.0 + 2.0 ** -10, abs=1e-15)
    assert lambda_safety(s0, s0) == 1.0
    # clamped outside [0, s0]
    assert lambda_safety(-1.0, s0) == 2.0
    assert lambda_safety(3.0 * s0, s0) == 1.0
    vals = lambda_safety(np.array([0.0, s0]), s0)
    assert vals.shape == (2,) and vals[0] == 2.0
    with pytest.raises(ValueError):
        lambda_safety(0.5, 0.0)


def test_compose_linearity_in_k_safety():
    model = _toy_model()
    rng = np.random.default_rng(0)
    x = rng.uniform(-0.5, 1.5, size=(20, 2))
    s = rng.uniform(0, model.s0, 20)
    a = compose(x, s, model, PotentialParams(k_safety=0.7))
    b = compose(x, s, model, PotentialParams(k_safety=0.0))
    lam = lambda_safety(s, model.s0)
    assert np.allclose(a.phi - b.phi, 0.7 * lam * a.phi_safety, atol=1e-12)
    from pnpf.energyfields import eval_field
    _, sg = eval_field(model.safety_field, x, s)
    assert np.allclose(a.grad - b.grad, 0.7 * lam[:, None] * sg, atol=1e-12)
    # k=0 reduces to the nominal field alone
    nv, ng = eval_field(model.nominal_field, x, s)
    assert np.array_equal(b.phi, nv) and np.array_equal(b.grad, ng)


def test_compose_single_matches_batched():
    model = _toy_model()
    rng = np.random.default_rng(1)
    x = rng.uniform(-0.5, 1.5, size=(6, 2))
    s = rng.uniform(0, model.s0, 6)
    params = PotentialParams(k_safety=1.3,
                             obstacles=[Obstacle((0.5, 0.3), 0.1)],
                             goal=((1.0, 0.0), 2.0), goal_threshold=0.4 * model.s0)
    batch = compose(x, s, model, params)
    for i in range(6):
        one = compose(x[i], float(s[i]), model, params)
        assert one.phi == pytest.approx(batch.phi[i], rel=1e-12)
        assert np.allclose(one.grad, batch.grad[i], rtol=1e-12, atol=1e-14)
        assert one.inside_obstacle == batch.inside_obstacle[i]


def test_obstacle_compact_support():
    obs = Obstacle((0.0, 0.0), radius=0.2, strength=1.5)
    params = PotentialParams(obstacles=[obs])
    d_inf = params.influence_factor * obs.radius
    r_edge = obs.radius + d_inf
    just_out = obstacle_goal_terms(np.array([r_edge + 1e-9, 0.0]), 1.0, params)
    assert just_out.value == 0.0 and np.all(just_out.grad == 0.0)
    just_in = obstacle_goal_terms(np.array([r_edge - 1e-4, 0.0]), 1.0, params)
    assert just_in.value > 0.0
    far = obstacle_goal_terms(np.array([5.0, 5.0]), 1.0, params)
    assert far.value == 0.0 and np.all(far.grad == 0.0)
    assert not far.inside_obstacle


def test_obstacle_gradient_finite_difference():
    obs = Obstacle((0.1, -0.2), radius=0.3, strength=2.0)
    params = PotentialParams(obstacles=[obs])
    rng = np.random.default_rng(2)
    h = 1e-6
    checked = 0
    for _ in range(200):
        x = rng.uniform(-1.2, 1.2, size=2)
        d = np.linalg.norm(x - np.array(obs.center)) - obs.radius
        # stay clear of the clamp band and the support boundary
        if d < 0.05 or abs(d - params.influence_factor * obs.radius) < 0.02:
            continue
        terms = obstacle_goal_terms(x, 1.0, params)
        fd = np.empty(2)
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd[j] = (obstacle_goal_terms(x + e, 1.0, params).value
                     - obstacle_goal_terms(x - e, 1.0, params).value) / (2 * h)
        assert np.allclose(terms.grad, fd, atol=1e-4)
        checked += 1
    assert checked > 50


def test_obstacle_inside_flag_and_outward_push():
    obs = Obstacle((0.0, 0.0), radius=0.5)
    params = PotentialParams(obstacles=[obs])
    terms = obstacle_goal_terms(np.array([0.2, 0.0]), 1.0, params)
    assert terms.inside_obstacle
    # descent direction (-grad) points away from the center
    assert -terms.grad[0] > 0.0


def test_obstacle_acts_on_leading_coords():
    obs = Obstacle((0.0, 0.0), radius=0.3)
    params = PotentialParams(obstacles=[obs])
    x = np.array([0.35, 0.0, 7.0, -3.0])
    terms = obstacle_goal_terms(x, 1.0, params)
    assert terms.value > 0.0
    assert np.all(terms.grad[2:] == 0.0)


def test_goal_term_phase_gating_and_exact_gradient():
    goal = np.array([1.0, -0.5])
    params = PotentialParams(goal=(tuple(goal), 3.0), goal_threshold=0.2)
    x = np.array([0.4, 0.7])
    off = obstacle_goal_terms(x, 0.2, params)  # s == threshold: off
    assert off.value == 0.0 and np.all(off.grad == 0.0)
    on = obstacle_goal_terms(x, 0.1, params)
    assert on.value == pytest.approx(0.5 * 3.0 * np.sum((x - goal) ** 2))
    assert np.array_equal(on.grad, 3.0 * (x - goal))


def test_compose_periodic_case_split():
    model = _toy_model(periodic=True)
    from pnpf.energyfields import eval_field
    rng = np.random.default_rng(3)
    x = rng.uniform(-0.5, 1.5, size=(10, 2))
    params = PotentialParams(k_safety=0.8)
    # s >= 0: nominal + k * safety, no lambda factor
    s_pos = rng.uniform(0, 1.0, 10)
    comp = compose_periodic(x, s_pos, model, params)
    nv, ng = eval_field(model.nominal_field, x, s_pos)
    sv, sg = eval_field(model.safety_field, x, s_pos)
    assert np.allclose(comp.phi, nv + 0.8 * sv, atol=1e-12)
    assert np.allclose(comp.grad, ng + 0.8 * sg, atol=1e-12)
    # s < 0: safety alone
    comp2 = compose_periodic(x, np.full(10, -0.1), model, params)
    sv2, sg2 = eval_field(model.safety_field, x, np.full(10, -0.1))
    assert np.array_equal(comp2.phi, 0.8 * sv2)
    assert np.array_equal(comp2.grad, 0.8 * sg2)
    assert np.all(comp2.phi_nominal == 0.0)
    # scalar path
    one = compose_periodic(x[0], -0.1, model, params)
    assert one.phi == comp2.phi[0]


def test_potential_params_validation():
    with pytest.raises(ValueError):
        PotentialParams(k_safety=-1.0)
    with pytest.raises(ValueError):
        PotentialParams(alpha=-0.5)
    with pytest.raises(ValueError):
        Obstacle((0.0, 0.0), radius=0.0)
