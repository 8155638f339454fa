"""Generative trajectory model: decoder MLP conditioned on per-demonstration
latent embeddings, plus nominal-trajectory selection.

The decoder maps a time encoding (scalar t for point-to-point, [sin, cos] of
the cycle phase for periodic motions) to a state; each demonstration owns a
learnable latent vector that modulates the decoder through a hyper net.
Novel trajectories come from latents sampled in the convex hull of the
trained embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingFailure
from .geomath import Trajectory, arc_length, dtw_align, dtw_distance
from .nets import AdamW, FilmMLP

__all__ = [
    "GeneratorConfig",
    "GeneratorModel",
    "NominalTrajectory",
    "time_align",
    "train_generator",
    "sample_latents",
    "generate_trajectory",
    "anchor_endpoint",
    "select_nominal",
]


@dataclass
class GeneratorConfig:
    latent_dim: int = 8
    hidden: tuple = (64, 64, 64)
    hyper_hidden: tuple = (64, 64)
    epochs: int = 3000
    learning_rate: float = 3e-3
    weight_decay: float = 1e-5
    fit_tolerance: float = 0.02  # per-demo RMSE in normalized units
    end_weight: float = 100.0  # loss weight on the final time sample
    seed: int = 0


@dataclass
class GeneratorModel:
    net: FilmMLP
    embeddings: np.ndarray  # (M, L)
    mode: str  # "point-to-point" | "periodic"
    period: float | None
    x_mean: np.ndarray
    x_scale: float
    n_time_points: int
    loss_curve: list = field(default_factory=list, repr=False)

    @property
    def dim(self) -> int:
        return self.net.out_dim


@dataclass
class NominalTrajectory:
    """Selected nominal path with per-point remaining arc length.

    For point-to-point motions the first `n_ext` points are a straight-line
    extrapolation prepended before the true start; their phase values exceed
    `s0`.  For periodic motions the points cover one closed cycle and
    `s_period` is its arc length.
    """

    points: np.ndarray  # (N, d), extension included
    s: np.ndarray  # (N,), strictly decreasing to 0
    s0: float  # arc length of the unextended nominal
    n_ext: int = 0
    mode: str = "point-to-point"
    s_period: float | None = None

    @property
    def core_points(self) -> np.ndarray:
        return self.points[self.n_ext:]

    def point_at_phase(self, s_val: float) -> np.ndarray:
        """Linear interpolation of the nominal at a phase value."""
        # self.s is decreasing; np.interp needs increasing x
        return np.array([
            np.interp(-s_val, -self.s, self.points[:, j])
            for j in range(self.points.shape[1])
        ])


def _demo_points(demo) -> np.ndarray:
    return demo.points if isinstance(demo, Trajectory) else np.asarray(demo, dtype=float)


def time_align(demos: list) -> list[Trajectory]:
    """DTW-align all demonstrations to the median-length one.

    Every output has the reference's length; when a reference index matches
    several query points, the closest matched query point is kept.
    Timestamps are normalized to [0, 1].
    """
    if len(demos) < 2:
        raise ValueError("need at least 2 demonstrations")
    pts = [_demo_points(d) for d in demos]
    if len({p.shape[1] for p in pts}) != 1:
        raise ValueError("demonstrations must share dimension")
    order = np.argsort([len(p) for p in pts], kind="stable")
    ref_idx = int(order[(len(pts) - 1) // 2])
    ref = pts[ref_idx]
    n = len(ref)
    ts = np.linspace(0.0, 1.0, n)
    out = []
    for i, p in enumerate(pts):
        if i == ref_idx:
            out.append(Trajectory(ref.copy(), ts))
            continue
        path = dtw_align(ref, p)
        resampled = np.empty_like(ref)
        best = np.full(n, np.inf)
        for ri, qi in path:
            dist = float(np.linalg.norm(ref[ri] - p[qi]))
            if dist < best[ri]:
                best[ri] = dist
                resampled[ri] = p[qi]
        out.append(Trajectory(resampled, ts))
    return out


def _time_encoding(t: np.ndarray, mode: str, period: float | None) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if mode == "periodic":
        ang = 2.0 * np.pi * t / period
        return np.stack([np.sin(ang), np.cos(ang)], axis=-1)
    return t[:, None]


def train_generator(demos: list, config: GeneratorConfig, mode: str = "point-to-point",
                    period: float | None = None) -> GeneratorModel:
    """Fit decoder weights and per-demo embeddings jointly with AdamW."""
    aligned = [_demo_points(d) for d in demos]
    lengths = {len(a) for a in aligned}
    if len(lengths) != 1:
        raise ValueError("demos must be time-aligned (equal lengths)")
    n = lengths.pop()
    m = len(aligned)
    stacked = np.stack(aligned)  # (M, T, d)
    d = stacked.shape[2]
    x_mean = stacked.reshape(-1, d).mean(axis=0)
    x_scale = float(max(stacked.reshape(-1, d).std(axis=0).max(), 1e-9))
    targets = (stacked - x_mean) / x_scale

    if mode == "periodic":
        if period is None:
            raise ValueError("periodic mode requires a period")
        t_raw = np.linspace(0.0, period, n)
    else:
        t_raw = np.linspace(0.0, 1.0, n)
    enc = _time_encoding(t_raw, mode, period)  # (T, e)

    rng = np.random.default_rng(config.seed)
    net = FilmMLP(in_dim=enc.shape[1], cond_dim=config.latent_dim,
                  hidden=list(config.hidden), hyper_hidden=list(config.hyper_hidden),
                  out_dim=d, seed=config.seed)
    emb = rng.normal(scale=0.1, size=(m, config.latent_dim))

    X = np.tile(enc, (m, 1))
    Y = targets.reshape(m * n, d)
    idx = np.repeat(np.arange(m), n)
    # reaching motions share their endpoint across demos, and the decoder is
    # otherwise unconstrained at the open time boundary; upweighting the last
    # sample pins every embedding's decoded endpoint, which keeps the
    # endpoint drift of convex-mixture candidates small
    w = np.ones(n)
    if mode != "periodic":
        w[-1] = config.end_weight
    w = np.tile(w, m)[:, None]
    w_norm = float(w.mean())

    params = dict(net.params)
    params["emb"] = emb
    net.params = params  # optimizer and net share storage
    opt = AdamW(params, lr=config.learning_rate, weight_decay=config.weight_decay)
    loss_curve = []
    for _ in range(config.epochs):
        cache = {}
        pred = net.forward(X, emb[idx], cache_out=cache)
        resid = pred - Y
        loss = float((w * resid**2).mean() / w_norm)
        loss_curve.append(loss)
        grads, _, dc = net.backward(cache, w * resid * (2.0 / (w_norm * len(X))))
        demb = np.zeros_like(emb)
        np.add.at(demb, idx, dc)
        grads["emb"] = demb
        opt.step(grads)
        emb = params["emb"]

    net.params = {k: v for k, v in params.items() if k != "emb"}
    model = GeneratorModel(net=net, embeddings=emb, mode=mode, period=period,
                           x_mean=x_mean, x_scale=x_scale, n_time_points=n,
                           loss_curve=loss_curve)
    errs = _per_demo_rmse(model, enc, targets)
    if float(np.max(errs)) > config.fit_tolerance:
        raise TrainingFailure(
            f"generator fit failed: worst per-demo RMSE {np.max(errs):.4g} > "
            f"{config.fit_tolerance}", loss_curve, {"per_demo_rmse": errs.tolist()})
    return model


def _per_demo_rmse(model: GeneratorModel, enc: np.ndarray, targets: np.ndarray) -> np.ndarray:
    errs = []
    for i in range(len(model.embeddings)):
        pred = model.net.forward(enc, model.embeddings[i])
        errs.append(float(np.sqrt(np.mean((pred - targets[i]) ** 2))))
    return np.array(errs)


def sample_latents(model: GeneratorModel, n: int, seed: int = 0) -> np.ndarray:
    """Convex-hull samples: flat-Dirichlet mixtures of the trained embeddings.

    When n >= M the M vertices themselves lead the output.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    emb = model.embeddings
    m = len(emb)
    rng = np.random.default_rng(seed)
    out = []
    if n >= m:
        out.extend(emb.copy())
    while len(out) < n:
        w = rng.dirichlet(np.ones(m))
        out.append(w @ emb)
    return np.array(out[:n])


def generate_trajectory(model: GeneratorModel, h: np.ndarray, num_points: int) -> Trajectory:
    """Decode a latent on a uniform time grid (one full cycle when periodic)."""
    if num_points < 2:
        raise ValueError("num_points must be >= 2")
    if model.mode == "periodic":
        t = np.linspace(0.0, model.period, num_points)
    else:
        t = np.linspace(0.0, 1.0, num_points)
    enc = _time_encoding(t, model.mode, model.period)
    pred = model.net.forward(enc, np.asarray(h, dtype=float))
    return Trajectory(pred * model.x_scale + model.x_mean, None if model.mode == "periodic" else t)


def anchor_endpoint(traj: Trajectory, target: np.ndarray) -> Trajectory:
    """Linear-ramp shift so a reconstructed point-to-point candidate ends
    exactly at the demonstrated target.

    The decoder has no constraint at the open time boundary, so its largest
    reconstruction bias sits at the endpoint; demonstrations of a reaching
    motion all terminate at the same target, and a first-order correction
    (zero at the start, full shift at the end) removes the bias without
    visibly distorting the shape."""
    pts = traj.points
    ramp = np.linspace(0.0, 1.0, len(pts))[:, None]
    shift = np.asarray(target, dtype=float) - pts[-1]
    return Trajectory(pts + ramp * shift, traj.timestamps)


def _dedupe(points: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    keep = np.concatenate([[True], seg > 1e-12])
    return points[keep]


def select_nominal(candidates: list, demos: list, extension_fraction: float = 0.05,
                   mode: str = "point-to-point") -> NominalTrajectory:
    """Pick the candidate minimizing summed DTW distance to the demos.

    Point-to-point nominals get a straight-line prefix (first-order
    extrapolation before the start, length = extension_fraction * s0) so the
    phase is defined slightly beyond the demonstrated start.
    """
    if not candidates:
        raise ValueError("empty candidate list")
    demo_pts = [_demo_points(d) for d in demos]
    scores = []
    for cand in candidates:
        cp = _demo_points(cand)
        scores.append(sum(dtw_distance(cp, dp) for dp in demo_pts))
    best = int(np.argmin(scores))  # ties -> lowest index
    points = _dedupe(_demo_points(candidates[best]))

    cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(points, axis=0), axis=1))])
    s0 = float(cum[-1])
    s_vals = s0 - cum

    if mode == "periodic":
        return NominalTrajectory(points=points, s=s_vals, s0=s0, n_ext=0,
                                 mode="periodic", s_period=s0)

    ext_len = extension_fraction * s0
    mean_seg = s0 / (len(points) - 1)
    n_ext = max(1, int(round(ext_len / mean_seg)))
    direction = points[0] - points[1]
    direction = direction / np.linalg.norm(direction)
    offsets = ext_len * np.arange(n_ext, 0, -1) / n_ext
    prefix = points[0] + direction * offsets[:, None]
    full = np.vstack([prefix, points])
    full_s = np.concatenate([s0 + offsets, s_vals])
    return NominalTrajectory(points=full, s=full_s, s0=s0, n_ext=n_ext,
                             mode="point-to-point")
