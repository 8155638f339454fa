"""End-to-end training: demonstrations in, a ready-to-run model out."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .datasets import TaskSpec
from .energyfields import (
    FieldConfig,
    TrainingSet,
    build_nominal_targets,
    build_safety_targets,
    phase_grid,
    train_field,
)
from .geomath import Trajectory
from .model import PnpfModel
from .safeset import SafetySamples, build_inlier_set, default_eps_sdf, sample_outliers
from .trajgen import (
    GeneratorConfig,
    anchor_endpoint,
    generate_trajectory,
    sample_latents,
    select_nominal,
    time_align,
    train_generator,
)

__all__ = ["PipelineConfig", "train_pipeline"]


@dataclass
class PipelineConfig:
    seed: int = 0
    n_candidates: int = 200  # generated nominal candidates
    s_w_frac: float = 0.15  # energy window as a fraction of s0
    lambda_safety: float = 2.0
    alpha: float | None = None  # default scales with eps_sdf (see train_pipeline)
    alpha_step_frac: float = 0.25  # default-alpha step size, fraction of eps_sdf
    dt_ref: float = 0.02  # control period the default alpha is sized for
    eps_sdf: float | None = None  # default: covers the demo tube width
    n_outliers_per_inlier: float = 0.5
    n_phase_grid: int = 100
    ball_radius_frac: float = 0.25  # of the data-supported radius r
    far_radius_frac: float = 0.25  # coarse coverage scale, fraction of s_w
    v_max_factor: float = 1.5  # times the peak demonstrated speed
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    nominal_field: FieldConfig = field(default_factory=lambda: FieldConfig(
        epochs=300, learning_rate=5e-3, tolerance=0.06))
    safety_field: FieldConfig = field(default_factory=lambda: FieldConfig(
        epochs=250, learning_rate=3e-3, tolerance=0.1))
    keep_generator: bool = False


def _split_cycles(demo: Trajectory, period: float) -> list[Trajectory]:
    """Cut a multi-cycle demonstration at period boundaries."""
    t = demo.timestamps
    if t is None:
        raise ValueError("periodic demos need timestamps")
    out = []
    n_cycles = max(1, int(round((t[-1] - t[0]) / period)))
    for c in range(n_cycles):
        lo, hi = t[0] + c * period, t[0] + (c + 1) * period
        mask = (t >= lo - 1e-9) & (t <= hi + 1e-9)
        if mask.sum() >= 2:
            out.append(Trajectory(demo.points[mask], t[mask] - lo))
    return out


def _peak_speed(demos: list) -> float:
    peak = 0.0
    for d in demos:
        if d.timestamps is None:
            continue
        dt = np.diff(d.timestamps)
        v = np.linalg.norm(np.diff(d.points, axis=0), axis=1) / np.maximum(dt, 1e-12)
        peak = max(peak, float(v.max()))
    return peak


def _supported_radius(nominal, samples: SafetySamples, s_grid, s_w: float) -> float:
    """Radius of the data-supported tube: the farthest inlier from the
    nominal curve.  Perturbation balls (training and evaluation alike) are
    sized as a fraction of this, so they stay inside the demonstrated
    region instead of sweeping across the phase window."""
    tube = cKDTree(nominal.points).query(samples.x_in)[0]
    if not len(tube):
        return samples.eps_sdf
    return float(np.max(tube))


def train_pipeline(task: TaskSpec, config: PipelineConfig | None = None) -> PnpfModel:
    """Full training pass: align, fit the generator, pick the nominal, build
    the safety sets, fit both energy fields."""
    config = config or PipelineConfig()
    periodic = task.mode == "periodic"
    demos = task.demos
    if periodic:
        cycles = []
        for d in demos:
            cycles.extend(_split_cycles(d, task.period))
        train_demos = cycles
    else:
        train_demos = demos
    aligned = time_align(train_demos)
    gen_cfg = GeneratorConfig(**{**config.generator.__dict__, "seed": config.seed})
    gen = train_generator(aligned, gen_cfg, mode=task.mode, period=task.period)
    n_points = len(aligned[0].points)
    latents = sample_latents(gen, config.n_candidates, seed=config.seed)
    candidates = [generate_trajectory(gen, h, n_points) for h in latents]
    if not periodic:
        target_end = np.mean([a.points[-1] for a in aligned], axis=0)
        candidates = [anchor_endpoint(c, target_end) for c in candidates]
    nominal = select_nominal(candidates, aligned, mode=task.mode)

    x_in, s_in = build_inlier_set(demos, nominal)
    if config.eps_sdf is not None:
        eps = config.eps_sdf
    else:
        # the zero band of the safety energy has to cover the spread of the
        # demonstrations around the nominal, otherwise on-path states sit on
        # a positive slope and the safety gradient fights the nominal one
        tube = cKDTree(nominal.points).query(x_in)[0]
        eps = max(default_eps_sdf(x_in), 3.0 * float(np.percentile(tube, 90)))
    n_out = max(200, int(config.n_outliers_per_inlier * len(x_in)))
    x_out = sample_outliers(x_in, task.bounds, eps, n_out, seed=config.seed + 1)
    samples = SafetySamples(x_in=x_in, s_in=s_in, x_out=x_out, eps_sdf=eps,
                            bounds=np.asarray(task.bounds, dtype=float))

    s_w = config.s_w_frac * nominal.s0
    grid = phase_grid(nominal, config.n_phase_grid)
    r = _supported_radius(nominal, samples, grid, s_w)
    ball = config.ball_radius_frac * r
    # second, coarser sampling scale for the safety field only: without it
    # the barrier is unconstrained between nearby path segments (crossings,
    # narrow waists) and a rollout can tunnel across instead of following
    # the demonstrated branch.  The nominal field stays on the fine scale;
    # mixing scales there measurably degrades its per-step descent quality
    ball_far = max(ball, config.far_radius_frac * s_w)

    nom_ts = build_nominal_targets(nominal, grid, s_w, ball_radius=ball,
                                   seed=config.seed + 2)
    nom_cfg = FieldConfig(**{**config.nominal_field.__dict__, "seed": config.seed + 3})
    s_total = nominal.s_period if periodic else nominal.s0
    nominal_field = train_field(nom_ts, "nominal", nom_cfg, periodic=periodic,
                                s_total=s_total)
    safe_ts = TrainingSet.concat([
        build_safety_targets(samples, grid, s_w,
                             lambda_safety=config.lambda_safety,
                             nominal=nominal, ball_radius=ball,
                             seed=config.seed + 4),
        build_safety_targets(samples, grid, s_w,
                             lambda_safety=config.lambda_safety,
                             nominal=nominal, ball_radius=ball_far,
                             max_inliers_per_phase=0, max_outliers_per_phase=0,
                             seed=config.seed + 14),
    ])
    safe_cfg = FieldConfig(**{**config.safety_field.__dict__, "seed": config.seed + 5})
    safety_field = train_field(safe_ts, "safety", safe_cfg, periodic=periodic,
                               s_total=s_total)

    peak = _peak_speed(demos)
    v_max = config.v_max_factor * peak if peak > 0 else 1.0
    if config.alpha is not None:
        alpha = config.alpha
    else:
        # size the gradient step so one control period moves a set fraction
        # of the safety band even on the steepest slopes
        alpha = config.alpha_step_frac * eps / config.dt_ref
    return PnpfModel(mode=task.mode, dim=task.dimension, nominal=nominal,
                     nominal_field=nominal_field, safety_field=safety_field,
                     samples=samples, s_w=s_w, lambda_slope=config.lambda_safety,
                     alpha=alpha, v_max=v_max,
                     generator=gen if config.keep_generator else None)
