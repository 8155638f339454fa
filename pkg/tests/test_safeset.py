import numpy as np
import pytest

from pnpf.errors import PnpfError
from pnpf.geomath import Trajectory
from pnpf.safeset import (
    SafetySamples,
    build_inlier_set,
    default_eps_sdf,
    sample_outliers,
    sdf_oracle,
)
from pnpf.trajgen import select_nominal


def _nominal_line(n=30):
    t = np.linspace(0, 1, n)
    demo = Trajectory(np.stack([t, 0.2 * t], axis=1))
    return demo, select_nominal([demo], [demo])


def test_build_inlier_set_nominal_only():
    demo, nom = _nominal_line()
    pts, s = build_inlier_set([Trajectory(nom.points.copy())], nom)
    assert np.allclose(pts, nom.points)
    assert np.allclose(s, nom.s)


def test_inlier_phase_matches_linear_scan():
    demo, nom = _nominal_line()
    rng = np.random.default_rng(0)
    cloud = Trajectory(demo.points + rng.normal(scale=0.05, size=demo.points.shape))
    pts, s = build_inlier_set([cloud], nom)
    for p, sv in zip(pts, s):
        k = int(np.argmin(np.linalg.norm(nom.points - p, axis=1)))
        assert sv == nom.s[k]


def test_build_inlier_dimension_mismatch():
    demo, nom = _nominal_line()
    with pytest.raises(ValueError):
        build_inlier_set([np.zeros((5, 3))], nom)


def test_sample_outliers_respects_predicate():
    rng = np.random.default_rng(1)
    ang = np.linspace(0, 2 * np.pi, 200)
    ring = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    bounds = np.array([[-3.0, 3.0], [-3.0, 3.0]])
    eps = 0.2
    out = sample_outliers(ring, bounds, eps, 500, seed=2)
    assert len(out) == 500
    for o in out:
        assert np.min(np.linalg.norm(ring - o, axis=1)) > eps
        assert np.all(o >= bounds[:, 0]) and np.all(o <= bounds[:, 1])


def test_sample_outliers_single_center_point():
    x_in = np.array([[0.0, 0.0]])
    bounds = np.array([[-1.0, 1.0], [-1.0, 1.0]])
    out = sample_outliers(x_in, bounds, 0.1, 200, seed=3)
    assert np.all(np.linalg.norm(out, axis=1) > 0.1)


def test_sample_outliers_impossible_eps():
    x_in = np.array([[0.0, 0.0]])
    bounds = np.array([[-1.0, 1.0], [-1.0, 1.0]])
    with pytest.raises(PnpfError):
        sample_outliers(x_in, bounds, 5.0, 50, seed=4, max_iter_factor=10)


def _toy_samples():
    rng = np.random.default_rng(5)
    x_in = rng.uniform(-0.5, 0.5, size=(40, 2))
    s_in = np.linspace(1.0, 0.0, 40)
    x_out = np.vstack([rng.uniform(1.0, 2.0, size=(30, 2)),
                       -rng.uniform(1.0, 2.0, size=(30, 2))])
    return SafetySamples(x_in=x_in, s_in=s_in, x_out=x_out, eps_sdf=0.1,
                         bounds=np.array([[-2.0, 2.0], [-2.0, 2.0]]))


def test_sdf_sign_consistency():
    s = _toy_samples()
    assert np.all(sdf_oracle(s.x_in, s) <= 0)
    assert np.all(sdf_oracle(s.x_out, s) >= 0)
    # member of X_out: value equals its min distance to X_in
    x = s.x_out[0]
    expect = np.min(np.linalg.norm(s.x_in - x, axis=1))
    assert sdf_oracle(x, s) == pytest.approx(expect)


def test_sdf_matches_double_loop_bruteforce():
    s = _toy_samples()
    rng = np.random.default_rng(6)
    for _ in range(200):
        x = rng.uniform(-2, 2, size=2)
        d_in = np.min(np.linalg.norm(s.x_in - x, axis=1))
        d_out = np.min(np.linalg.norm(s.x_out - x, axis=1))
        expect = -d_out if d_in <= d_out else d_in
        assert sdf_oracle(x, s) == pytest.approx(expect, abs=1e-12)


def test_sdf_phase_window_restriction_and_monotonicity():
    s = _toy_samples()
    x = np.array([0.9, 0.9])
    full = sdf_oracle(x, s)
    narrow = sdf_oracle(x, s, phase_window=(0.4, 0.1))
    wide = sdf_oracle(x, s, phase_window=(0.4, 0.6))
    assert wide <= narrow + 1e-12  # more inliers -> smaller value
    assert full <= wide + 1e-12
    with pytest.raises(PnpfError):
        sdf_oracle(x, s, phase_window=(5.0, 0.1))


def test_sdf_one_sided_lipschitz():
    # each one-sided value (dist to X_in, dist to X_out) is 1-Lipschitz; the
    # signed value can only jump where membership flips
    s = _toy_samples()
    rng = np.random.default_rng(7)
    for _ in range(200):
        a = rng.uniform(-2, 2, size=2)
        b = a + rng.normal(scale=0.1, size=2)
        step = np.linalg.norm(a - b)
        for ref in (s.x_in, s.x_out):
            da = np.min(np.linalg.norm(ref - a, axis=1))
            db = np.min(np.linalg.norm(ref - b, axis=1))
            assert abs(da - db) <= step + 1e-9
        va, vb = sdf_oracle(a, s), sdf_oracle(b, s)
        if (va <= 0) == (vb <= 0):
            assert abs(va - vb) <= step + 1e-9


def test_default_eps_sdf():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
    assert default_eps_sdf(pts) == pytest.approx(2.0)
