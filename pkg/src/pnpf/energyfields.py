"""Conditional neural energy fields.

Both fields share one architecture: a ReLU MLP on the raw state x, modulated
by a hyper net that sees only the position-encoded phase.  The safety field
regresses a rectified smoothed signed distance; the nominal field regresses
the windowed projection phase (remaining arc length of the nearest nominal
point).  Gradients with respect to x are analytic (phase held constant).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PnpfError, TrainingFailure
from .geomath import positional_encoding
from .nets import AdamW, FilmMLP
from .safeset import SafetySamples, sdf_oracle
from .trajgen import NominalTrajectory

__all__ = [
    "FieldConfig",
    "EnergyField",
    "TrainingSet",
    "smoothed_relu",
    "build_safety_targets",
    "build_nominal_targets",
    "train_field",
    "eval_field",
    "phase_grid",
]


@dataclass
class FieldConfig:
    hidden: tuple = (128, 128, 128)
    hyper_hidden: tuple = (128, 128)
    num_frequencies: int = 6
    epochs: int = 300
    batch_size: int = 2048
    learning_rate: float = 2e-3
    weight_decay: float = 1e-5
    holdout_fraction: float = 0.1
    tolerance: float = 0.05  # held-out weighted RMSE, normalized target units
    seed: int = 0


@dataclass
class TrainingSet:
    """Column-wise batch of (phase, state, target, weight) samples."""

    s: np.ndarray  # (N,)
    x: np.ndarray  # (N, d)
    target: np.ndarray  # (N,)
    weight: np.ndarray  # (N,)

    def __len__(self):
        return len(self.s)

    @staticmethod
    def concat(parts: list["TrainingSet"]) -> "TrainingSet":
        return TrainingSet(
            s=np.concatenate([p.s for p in parts]),
            x=np.vstack([p.x for p in parts]),
            target=np.concatenate([p.target for p in parts]),
            weight=np.concatenate([p.weight for p in parts]),
        )


@dataclass
class EnergyField:
    net: FilmMLP
    kind: str  # "safety" | "nominal"
    periodic: bool
    num_frequencies: int
    s_total: float  # s0 for point-to-point, cycle arc length for periodic
    x_mean: np.ndarray
    x_scale: float
    target_mean: float
    target_scale: float
    s_range: tuple[float, float]
    loss_curve: list = field(default_factory=list, repr=False)

    def phase_encoding(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.periodic:
            ang = 2.0 * np.pi * s / self.s_total
            comps = np.stack([np.sin(ang), np.cos(ang)], axis=-1)
        else:
            comps = (s / self.s_total)[:, None]
        return positional_encoding(comps, self.num_frequencies)

    def phase_in_range(self, s: float) -> bool:
        return self.periodic or (self.s_range[0] <= s <= self.s_range[1])


def smoothed_relu(v, slope: float, band: float):
    """relu(slope * v) with a C1 cubic blend on [0, band].

    Exactly 0 for v <= 0 and exactly slope*v for v >= band; in between the
    value is slope*v*smoothstep(v/band), so the gradient decays to 0 at the
    set boundary.
    """
    v = np.asarray(v, dtype=float)
    u = np.clip(v / band, 0.0, 1.0)
    blend = u * u * (3.0 - 2.0 * u)
    return np.where(v <= 0.0, 0.0, slope * v * np.where(v >= band, 1.0, blend))


def phase_grid(nominal: NominalTrajectory, n: int = 100) -> np.ndarray:
    """Uniform conditioning grid over the phase range."""
    if nominal.mode == "periodic":
        return np.linspace(0.0, nominal.s_period, n, endpoint=False)
    return np.linspace(0.0, nominal.s0, n)


def _ball_samples(rng: np.random.Generator, centers: np.ndarray, radius: float) -> np.ndarray:
    d = centers.shape[1]
    u = rng.standard_normal(size=centers.shape)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = radius * rng.uniform(0, 1, size=(len(centers), 1)) ** (1.0 / d)
    return centers + u * r


def _window_mask(s_vals: np.ndarray, lo: float, hi: float, periodic: bool,
                 s_total: float) -> np.ndarray:
    if not periodic:
        return (s_vals >= lo) & (s_vals <= hi)
    # cyclic band around the window center
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    diff = (s_vals - center + 0.5 * s_total) % s_total - 0.5 * s_total
    return np.abs(diff) <= half


def build_safety_targets(samples: SafetySamples, s_grid, s_w: float,
                         lambda_safety: float, nominal: NominalTrajectory | None = None,
                         ball_radius: float | None = None, n_per_phase: int = 64,
                         max_inliers_per_phase: int = 128,
                         max_outliers_per_phase: int = 96,
                         seed: int = 0) -> TrainingSet:
    """Targets = smoothed relu of lambda * windowed SDF, per conditioning phase.

    Query points per phase: the windowed inliers, outliers near the window,
    and (optionally) ball-perturbed nominal points.  Points deeper inside
    than eps_sdf get target exactly 0.
    """
    if lambda_safety <= 0:
        raise ValueError("lambda_safety must be positive")
    rng = np.random.default_rng(seed)
    periodic = nominal is not None and nominal.mode == "periodic"
    s_total = nominal.s_period if periodic else None
    band = samples.eps_sdf / 2.0
    parts = []
    for s_k in np.asarray(s_grid, dtype=float):
        mask = _window_mask(samples.s_in, s_k, s_k + s_w, periodic, s_total or 0.0)
        if not np.any(mask) and not periodic:
            # near the top of the phase range the forward window can overrun
            # the demonstrated phases (the nominal may start slightly before
            # every demo); fall back to the highest-phase inliers
            top = float(np.max(samples.s_in))
            if s_k > top - s_w:
                mask = samples.s_in >= top - s_w
        if not np.any(mask):
            raise PnpfError(f"empty inlier window at s={s_k}")
        win_in = samples.x_in[mask]
        # outliers closest to the window carry the boundary shape
        ref = win_in.mean(axis=0)
        if len(win_in) > max_inliers_per_phase:
            win_in = win_in[rng.choice(len(win_in), max_inliers_per_phase, replace=False)]
        d = np.linalg.norm(samples.x_out - ref, axis=1)
        out_sel = samples.x_out[np.argsort(d, kind="stable")[:max_outliers_per_phase]]
        queries = [win_in, out_sel]
        if nominal is not None and ball_radius is not None:
            nm = _window_mask(nominal.s, s_k, s_k + s_w, periodic, s_total or 0.0)
            centers = nominal.points[nm]
            if len(centers):
                centers = centers[rng.integers(0, len(centers), size=n_per_phase)]
                queries.append(_ball_samples(rng, centers, ball_radius))
        q = np.vstack(queries)
        sdf = _windowed_sdf(q, samples, mask)
        parts.append(TrainingSet(
            s=np.full(len(q), s_k), x=q,
            target=smoothed_relu(sdf, lambda_safety, band),
            weight=np.ones(len(q)),
        ))
    return TrainingSet.concat(parts)


def _windowed_sdf(q: np.ndarray, samples: SafetySamples, in_mask: np.ndarray) -> np.ndarray:
    from scipy.spatial import cKDTree

    d_in, _ = cKDTree(samples.x_in[in_mask]).query(q)
    d_out, _ = samples._out_tree.query(q)
    return np.where(d_in <= d_out, -d_out, d_in)


def build_nominal_targets(nominal: NominalTrajectory, s_grid, s_w: float,
                          ball_radius: float, n_per_phase: int = 96,
                          seed: int = 0) -> TrainingSet:
    """Ball-perturbed nominal points; target = phase of the windowed nearest
    nominal point (argmin restricted to s in [s_k - s_w, s_k + s_w]).

    For periodic motions, the window wraps and targets are unwrapped around
    the conditioning phase so they stay continuous across the cycle seam.
    """
    if ball_radius <= 0:
        raise ValueError("ball_radius must be positive")
    rng = np.random.default_rng(seed)
    periodic = nominal.mode == "periodic"
    s_total = nominal.s_period if periodic else 0.0
    parts = []
    for s_k in np.asarray(s_grid, dtype=float):
        mask = _window_mask(nominal.s, s_k - s_w, s_k + s_w, periodic, s_total)
        if not np.any(mask):
            raise PnpfError(f"empty nominal window at s={s_k}")
        seg_pts = nominal.points[mask]
        seg_s = nominal.s[mask]
        if periodic:
            seg_s = s_k + ((seg_s - s_k + 0.5 * s_total) % s_total - 0.5 * s_total)
        centers = seg_pts[rng.integers(0, len(seg_pts), size=n_per_phase)]
        x = np.vstack([seg_pts, _ball_samples(rng, centers, ball_radius)])
        diff = x[:, None, :] - seg_pts[None, :, :]
        idx = np.argmin(np.einsum("ijk,ijk->ij", diff, diff), axis=1)
        parts.append(TrainingSet(
            s=np.full(len(x), s_k), x=x, target=seg_s[idx], weight=np.ones(len(x)),
        ))
    return TrainingSet.concat(parts)


def train_field(tset: TrainingSet, kind: str, config: FieldConfig,
                periodic: bool = False, s_total: float | None = None) -> EnergyField:
    """Weighted-MSE AdamW fit with a held-out 10% split; deterministic per seed."""
    if len(tset) < 1000:
        raise ValueError(f"need >= 1000 training samples, got {len(tset)}")
    if s_total is None:
        s_total = float(np.max(tset.s)) or 1.0
    rng = np.random.default_rng(config.seed)
    n = len(tset)
    perm = rng.permutation(n)
    n_hold = max(1, int(round(config.holdout_fraction * n)))
    hold, train = perm[:n_hold], perm[n_hold:]

    x_mean = tset.x.mean(axis=0)
    x_scale = float(max(tset.x.std(axis=0).max(), 1e-12))
    t_mean = float(tset.target.mean())
    t_scale = float(max(tset.target.std(), 1e-12))

    proto = EnergyField(net=None, kind=kind, periodic=periodic,
                        num_frequencies=config.num_frequencies, s_total=s_total,
                        x_mean=x_mean, x_scale=x_scale, target_mean=t_mean,
                        target_scale=t_scale,
                        s_range=(float(tset.s.min()), float(tset.s.max())))
    enc_all = proto.phase_encoding(tset.s)
    xn_all = (tset.x - x_mean) / x_scale
    tn_all = (tset.target - t_mean) / t_scale

    net = FilmMLP(in_dim=tset.x.shape[1], cond_dim=enc_all.shape[1],
                  hidden=list(config.hidden), hyper_hidden=list(config.hyper_hidden),
                  out_dim=1, seed=config.seed)
    opt = AdamW(net.params, lr=config.learning_rate, weight_decay=config.weight_decay)
    loss_curve = []
    base_lr = config.learning_rate
    for epoch in range(config.epochs):
        # cosine decay to 2% of the base rate for a clean convergence tail
        frac = epoch / max(config.epochs - 1, 1)
        opt.lr = base_lr * (0.02 + 0.98 * 0.5 * (1 + np.cos(np.pi * frac)))
        order = rng.permutation(len(train))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            sel = train[order[start : start + config.batch_size]]
            cache = {}
            pred = net.forward(xn_all[sel], enc_all[sel], cache_out=cache)
            resid = pred[:, 0] - tn_all[sel]
            w = tset.weight[sel]
            loss = float(np.mean(w * resid**2))
            epoch_loss += loss * len(sel)
            grads, _, _ = net.backward(cache, (2.0 / len(sel)) * (w * resid)[:, None])
            opt.step(grads)
        loss_curve.append(epoch_loss / len(train))

    pred_hold = net.forward(xn_all[hold], enc_all[hold])[:, 0]
    w_hold = tset.weight[hold]
    rmse = float(np.sqrt(np.average((pred_hold - tn_all[hold]) ** 2, weights=w_hold)))
    proto.net = net
    proto.loss_curve = loss_curve
    if rmse > config.tolerance:
        raise TrainingFailure(
            f"{kind} field fit failed: held-out RMSE {rmse:.4g} > {config.tolerance}",
            loss_curve, {"holdout_rmse": rmse})
    return proto


def eval_field(field: EnergyField, x, s):
    """(value, grad_x); batched when x is (B, d) and s is (B,) or scalar.

    The phase is clamped to the trained range (check with
    field.phase_in_range).  Safety-kind outputs are clipped at 0, with zero
    gradient in the clipped region.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite state")
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if not field.periodic:
        s = np.clip(s, field.s_range[0], field.s_range[1])
    if len(s) == 1 and len(xb) > 1:
        s = np.full(len(xb), s[0])
    enc = field.phase_encoding(s)
    xn = (xb - field.x_mean) / field.x_scale
    y, g = field.net.grad_x(xn, enc)
    value = y * field.target_scale + field.target_mean
    grad = g * (field.target_scale / field.x_scale)
    if field.kind == "safety":
        neg = value < 0.0
        value = np.where(neg, 0.0, value)
        grad = np.where(neg[:, None], 0.0, grad)
    if single:
        return float(value[0]), grad[0]
    return value, grad
