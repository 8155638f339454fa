"""Data-driven safety set: inlier states with phase labels, rejection-sampled
outliers, and the non-parametric signed-distance oracle over both."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import PnpfError
from .geomath import Trajectory
from .trajgen import NominalTrajectory

__all__ = [
    "SafetySamples",
    "build_inlier_set",
    "sample_outliers",
    "sdf_oracle",
    "default_eps_sdf",
]


@dataclass
class SafetySamples:
    """Inlier states (phase-labeled), outlier states, and workspace bounds.

    bounds has shape (d, 2): per-axis [low, high].
    """

    x_in: np.ndarray  # (N, d)
    s_in: np.ndarray  # (N,)
    x_out: np.ndarray  # (K, d)
    eps_sdf: float
    bounds: np.ndarray

    def __post_init__(self):
        self._in_tree = cKDTree(self.x_in)
        self._out_tree = cKDTree(self.x_out) if len(self.x_out) else None

    @property
    def dim(self) -> int:
        return self.x_in.shape[1]


def _traj_points(t) -> np.ndarray:
    return t.points if isinstance(t, Trajectory) else np.asarray(t, dtype=float)


def build_inlier_set(trajs: list, nominal: NominalTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """All visited states, each labeled with the phase of its nearest nominal point."""
    if not trajs:
        raise ValueError("no trajectories")
    pts = np.vstack([_traj_points(t) for t in trajs])
    if pts.shape[1] != nominal.points.shape[1]:
        raise ValueError("dimension mismatch with nominal trajectory")
    tree = cKDTree(nominal.points)
    _, idx = tree.query(pts)
    return pts, nominal.s[idx]


def default_eps_sdf(x_in: np.ndarray) -> float:
    """2x the median nearest-neighbor spacing of the inlier set."""
    tree = cKDTree(x_in)
    d, _ = tree.query(x_in, k=2)
    return 2.0 * float(np.median(d[:, 1]))


def sample_outliers(x_in: np.ndarray, bounds, eps_sdf: float, n: int,
                    seed: int = 0, max_iter_factor: int = 100) -> np.ndarray:
    """Uniform rejection sampling over the bounds, keeping points farther than
    eps_sdf from every inlier."""
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.any(x_in < lo - 1e-12) or np.any(x_in > hi + 1e-12):
        raise ValueError("bounds do not enclose the inlier set")
    rng = np.random.default_rng(seed)
    tree = cKDTree(x_in)
    accepted = []
    tried = 0
    cap = max_iter_factor * n
    batch = max(n, 256)
    while len(accepted) < n and tried < cap:
        cand = rng.uniform(lo, hi, size=(batch, len(lo)))
        tried += batch
        d, _ = tree.query(cand)
        for c in cand[d > eps_sdf]:
            accepted.append(c)
            if len(accepted) == n:
                break
    if len(accepted) < n:
        rate = len(accepted) / max(tried, 1)
        raise PnpfError(
            f"outlier acceptance rate {rate:.3%}: bounds too tight or eps_sdf too large")
    return np.array(accepted)


def sdf_oracle(x, samples: SafetySamples, phase_window: tuple[float, float] | None = None):
    """Signed distance by the nearest-set rule.

    A query belongs to the inlier side iff its distance to X_in is <= its
    distance to X_out; the value is -dist(X_out) inside and +dist(X_in)
    outside.  With phase_window = (s_k, s_w), X_in is restricted to points
    with s in [s_k, s_k + s_w]; X_out is never restricted.

    Accepts a single point or a batch (B, d); returns scalar or (B,).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = np.atleast_2d(x)

    if phase_window is None:
        d_in, _ = samples._in_tree.query(xb)
    else:
        s_k, s_w = phase_window
        mask = (samples.s_in >= s_k) & (samples.s_in <= s_k + s_w)
        if not np.any(mask):
            raise PnpfError(f"empty inlier window at s={s_k}, s_w={s_w}")
        d_in, _ = cKDTree(samples.x_in[mask]).query(xb)
    if samples._out_tree is None:
        raise PnpfError("no outlier samples")
    d_out, _ = samples._out_tree.query(xb)

    val = np.where(d_in <= d_out, -d_out, d_in)
    return float(val[0]) if single else val
