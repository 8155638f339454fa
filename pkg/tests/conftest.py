import numpy as np
import pytest

from pnpf.energyfields import (
    FieldConfig,
    build_nominal_targets,
    build_safety_targets,
    phase_grid,
    train_field,
)
from pnpf.geomath import Trajectory
from pnpf.model import PnpfModel
from pnpf.safeset import SafetySamples, sample_outliers
from pnpf.trajgen import select_nominal


@pytest.fixture(scope="session")
def line_model():
    """Cheap hand-built model on a straight line, shared across test modules."""
    n = 60
    t = np.linspace(0, 1, n)
    demo = Trajectory(np.stack([t, np.zeros(n)], axis=1))
    nom = select_nominal([demo], [demo])
    rng = np.random.default_rng(0)
    reps = 20
    x_in = np.repeat(nom.points, reps, axis=0) + rng.normal(
        scale=0.05, size=(len(nom.points) * reps, 2))
    s_in = np.repeat(nom.s, reps)
    bounds = np.array([[-0.5, 1.5], [-1.0, 1.0]])
    x_out = sample_outliers(x_in, bounds, 0.15, 400, seed=1)
    samples = SafetySamples(x_in=x_in, s_in=s_in, x_out=x_out,
                            eps_sdf=0.15, bounds=bounds)
    grid = phase_grid(nom, 40)
    s_w = 0.25 * nom.s0
    nom_ts = build_nominal_targets(nom, grid, s_w, ball_radius=0.06,
                                   n_per_phase=48, seed=2)
    nom_field = train_field(nom_ts, "nominal",
                            FieldConfig(epochs=300, learning_rate=5e-3, seed=3,
                                        tolerance=0.06),
                            s_total=nom.s0)
    safe_ts = build_safety_targets(samples, grid, s_w, lambda_safety=2.0,
                                   nominal=nom, ball_radius=0.06, seed=4)
    safe_field = train_field(safe_ts, "safety",
                             FieldConfig(epochs=200, learning_rate=3e-3, seed=5,
                                         tolerance=0.1),
                             s_total=nom.s0)
    return PnpfModel(mode="point-to-point", dim=2, nominal=nom,
                     nominal_field=nom_field, safety_field=safe_field,
                     samples=samples, s_w=s_w, lambda_slope=2.0,
                     alpha=5.0, v_max=2.0)
