"""Demonstration datasets: the on-disk task schema, a loader for converted
handwriting shapes, and generators for intersecting and periodic tasks."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import PnpfError
from .geomath import Trajectory

__all__ = [
    "Crossing",
    "TaskSpec",
    "save_task",
    "load_task",
    "load_lasa",
    "lasa_shape_path",
    "convert_lasa_mat",
    "gen_intersecting_task",
    "gen_periodic_eight",
]

SCHEMA_VERSION = 1
DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


@dataclass(frozen=True)
class Crossing:
    """A self-intersection of the base curve.  Each pass records the phase
    (remaining arc length) at the crossing point plus its incoming and
    outgoing unit tangents; the pass index doubles as the branch label."""

    position: np.ndarray
    phases: tuple  # one value per pass, first pass first
    incoming: np.ndarray  # (n_passes, d) unit tangents
    outgoing: np.ndarray  # (n_passes, d)


@dataclass
class TaskSpec:
    name: str
    mode: str  # "point-to-point" | "periodic"
    dimension: int
    demos: list  # of Trajectory
    bounds: np.ndarray  # (d, 2)
    units: str = "au"
    period: float | None = None  # seconds per cycle, periodic mode only
    crossings: list = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in ("point-to-point", "periodic"):
            raise ValueError(f"unknown mode: {self.mode}")
        if len(self.demos) < 2:
            raise ValueError("a task needs at least 2 demonstrations")
        for d in self.demos:
            if d.points.shape[1] != self.dimension:
                raise ValueError("demo dimension mismatch")
        if self.mode == "periodic" and self.period is None:
            raise ValueError("periodic task needs a period")


def save_task(task: TaskSpec, path):
    doc = {
        "version": SCHEMA_VERSION,
        "name": task.name,
        "mode": task.mode,
        "d": task.dimension,
        "units": task.units,
        "bounds": task.bounds.tolist(),
        "demos": [{
            "timestamps": None if d.timestamps is None else d.timestamps.tolist(),
            "points": d.points.tolist(),
        } for d in task.demos],
    }
    if task.period is not None:
        doc["period"] = task.period
    if task.crossings:
        doc["crossings"] = [{
            "position": c.position.tolist(),
            "phases": list(c.phases),
            "incoming": c.incoming.tolist(),
            "outgoing": c.outgoing.tolist(),
        } for c in task.crossings]
    with open(path, "w") as f:
        json.dump(doc, f)


def load_task(path) -> TaskSpec:
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise PnpfError(f"malformed task file {path}: line {e.lineno} "
                        f"column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict) or doc.get("version") != SCHEMA_VERSION:
        raise PnpfError(f"unsupported task file version in {path}")
    try:
        demos = [Trajectory(np.asarray(d["points"], dtype=float),
                            None if d.get("timestamps") is None
                            else np.asarray(d["timestamps"], dtype=float))
                 for d in doc["demos"]]
        crossings = [Crossing(position=np.asarray(c["position"], dtype=float),
                              phases=tuple(c["phases"]),
                              incoming=np.asarray(c["incoming"], dtype=float),
                              outgoing=np.asarray(c["outgoing"], dtype=float))
                     for c in doc.get("crossings", [])]
        return TaskSpec(name=doc["name"], mode=doc["mode"], dimension=doc["d"],
                        demos=demos, bounds=np.asarray(doc["bounds"], dtype=float),
                        units=doc.get("units", "au"), period=doc.get("period"),
                        crossings=crossings)
    except (KeyError, TypeError) as e:
        raise PnpfError(f"malformed task file {path}: {e!r}") from e


def lasa_shape_path(name: str) -> str:
    return os.path.join(DATA_DIR, f"lasa_{name.lower()}.json")


def load_lasa(path) -> TaskSpec:
    """Load a converted handwriting shape: 2D point-to-point demos in cm,
    all ending at a common attractor."""
    task = load_task(path)
    if task.dimension != 2 or task.mode != "point-to-point":
        raise PnpfError(f"{path} is not a 2D point-to-point handwriting task")
    attractor = task.demos[0].points[-1]
    for d in task.demos:
        if np.max(np.abs(d.points[-1] - attractor)) > 1e-6:
            raise PnpfError("demos do not share a common attractor")
    return task


def convert_lasa_mat(mat_path, name: str) -> TaskSpec:
    """One-time converter from the public handwriting dataset's .mat
    container (struct array `demos` with per-demo `pos` (2, N) and `t`).
    Demos are translated so the common attractor sits at the origin."""
    from scipy.io import loadmat  # soft dependency, converter only

    raw = loadmat(mat_path, squeeze_me=True, struct_as_record=False)
    if "demos" not in raw:
        raise PnpfError(f"{mat_path}: no `demos` struct found")
    demos = []
    for rec in np.atleast_1d(raw["demos"]):
        pos = np.asarray(rec.pos, dtype=float).T  # (N, 2)
        t = np.asarray(rec.t, dtype=float).ravel()
        demos.append((pos, t))
    attractor = np.mean([p[-1] for p, _ in demos], axis=0)
    trajs = []
    for pos, t in demos:
        pos = pos - attractor
        pos[-1] = 0.0  # snap the final point onto the shared attractor
        trajs.append(Trajectory(pos, t))
    pts = np.vstack([tr.points for tr in trajs])
    bounds = _bounds_with_margin(pts)
    return TaskSpec(name=name, mode="point-to-point", dimension=2,
                    demos=trajs, bounds=bounds, units="cm")


def _bounds_with_margin(pts: np.ndarray, margin: float = 0.2) -> np.ndarray:
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = margin * np.maximum(hi - lo, 1e-9)
    return np.stack([lo - pad, hi + pad], axis=1)


def _smooth_noise(u: np.ndarray, dim: int, scale: float, rng, n_modes: int = 3):
    """Low-frequency perturbation, pinned to zero at both ends of u in [0,1]."""
    out = np.zeros((len(u), dim))
    if scale == 0.0:
        return out
    for k in range(1, n_modes + 1):
        amp = rng.normal(scale=scale / k, size=dim)
        phase = rng.uniform(0, 2 * np.pi, size=dim)
        out += amp * np.sin(k * np.pi * u[:, None] + phase)
    return out * np.sin(np.pi * u)[:, None]


# narrow-waisted curves: the x amplitude is small against the y amplitude so
# the two passes through each crossing arrive with nearly parallel tangents
_EIGHT_A, _EIGHT_B = 0.16, 1.0


def _base_curve(shape: str):
    """Returns (f(theta) -> (N, 2), theta range, crossing theta pairs)."""
    a, b = _EIGHT_A, _EIGHT_B
    if shape == "figure-eight":
        f = lambda th: np.stack([a * np.sin(th), b * np.sin(2 * th)], axis=1)
        return f, (np.pi / 2, 2 * np.pi + np.pi / 2), [(np.pi, 2 * np.pi)]
    if shape == "pulley-like":
        f = lambda th: np.stack(
            [a * np.sin(th), b * np.sin(2 * th) + 0.35 * b * np.sin(th)], axis=1)
        return f, (np.pi / 2, 2 * np.pi + np.pi / 2), [(np.pi, 2 * np.pi)]
    if shape == "double-knot-like":
        f = lambda th: np.stack([a * np.sin(th), b * np.cos(3 * th)], axis=1)
        return f, (0.05, 2 * np.pi), [(np.pi / 6, 5 * np.pi / 6),
                                      (7 * np.pi / 6, 11 * np.pi / 6)]
    raise ValueError(f"unknown intersecting shape: {shape}")


def _tangent(f, th: float, h: float = 1e-6) -> np.ndarray:
    d = (f(np.array([th + h])) - f(np.array([th - h])))[0]
    return d / np.linalg.norm(d)


def _phase_at(theta_grid, base_pts, th: float) -> float:
    """Remaining arc length of the base polyline at parameter th."""
    seg = np.linalg.norm(np.diff(base_pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s0 = cum[-1]
    done = np.interp(th, theta_grid, cum)
    return float(s0 - done)


def gen_intersecting_task(shape: str, n_demos: int = 6, noise_scale: float = 0.02,
                          seed: int = 0, n_points: int = 800,
                          duration: float = 5.0) -> TaskSpec:
    """Point-to-point task whose base curve crosses itself where the two
    incoming segments are nearly identical in position and velocity, so the
    correct onward action depends on the phase, not the state."""
    if n_demos < 2:
        raise ValueError("n_demos must be >= 2")
    f, (th0, th1), pairs = _base_curve(shape)
    th = np.linspace(th0, th1, n_points)
    base = f(th)
    u = (th - th0) / (th1 - th0)
    rng = np.random.default_rng(seed)
    demos = []
    for _ in range(n_demos):
        demos.append(Trajectory(base + _smooth_noise(u, 2, noise_scale, rng),
                                np.linspace(0.0, duration, n_points)))
    crossings = []
    for pair in pairs:
        pos = f(np.array([pair[0]]))[0]
        phases = tuple(_phase_at(th, base, t) for t in pair)
        inc = np.stack([_tangent(f, t) for t in pair])
        out = np.stack([_tangent(f, t) for t in pair])  # smooth curve: same
        crossings.append(Crossing(position=pos, phases=phases,
                                  incoming=inc, outgoing=out))
    pts = np.vstack([d.points for d in demos])
    return TaskSpec(name=shape, mode="point-to-point", dimension=2,
                    demos=demos, bounds=_bounds_with_margin(pts),
                    crossings=crossings)


def eight_cycle_arc_length(n: int = 200000) -> float:
    """Arc length of one cycle of the base figure-eight, by fine-grid sums."""
    th = np.linspace(np.pi / 2, 2 * np.pi + np.pi / 2, n)
    pts = np.stack([_EIGHT_A * np.sin(th), _EIGHT_B * np.sin(2 * th)], axis=1)
    return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))


_LASA_WAYPOINTS = {
    # handwriting-style strokes in cm, drawn toward an attractor at the origin
    "gshape": [(22.0, 24.0), (6.0, 30.0), (-14.0, 22.0), (-19.0, 4.0),
               (-8.0, -13.0), (9.0, -11.0), (12.0, 1.0), (0.0, 0.0)],
    "angle": [(26.0, 28.0), (14.0, 13.0), (7.5, 4.5), (12.0, -3.0), (0.0, 0.0)],
    "sine": [(30.0, 0.0), (24.0, 7.0), (16.0, -7.0), (8.0, 7.0), (0.0, 0.0)],
}


def make_lasa_style(name: str, n_demos: int = 7, seed: int = 0,
                    n_points: int = 1000, duration: float = 5.0) -> TaskSpec:
    """Analytic stand-in for a converted handwriting shape: a spline stroke
    ending at the origin attractor, with smooth per-demo variation."""
    from scipy.interpolate import CubicSpline

    if name not in _LASA_WAYPOINTS:
        raise ValueError(f"unknown shape: {name}")
    wp = np.asarray(_LASA_WAYPOINTS[name], dtype=float)
    seg = np.linalg.norm(np.diff(wp, axis=0), axis=1)
    knots = np.concatenate([[0.0], np.cumsum(seg)]) / np.sum(seg)
    spline = CubicSpline(knots, wp, axis=0)
    u = np.linspace(0.0, 1.0, n_points)
    base = spline(u)
    rng = np.random.default_rng(seed)
    demos = []
    for _ in range(n_demos):
        # variation fades out toward the attractor so every demo ends there
        noise = _smooth_noise(u, 2, 1.2, rng) * (1.0 - u)[:, None]
        pts = base + noise
        pts[-1] = 0.0
        demos.append(Trajectory(pts, np.linspace(0.0, duration, n_points)))
    pts_all = np.vstack([d.points for d in demos])
    return TaskSpec(name=name, mode="point-to-point", dimension=2,
                    demos=demos, bounds=_bounds_with_margin(pts_all), units="cm")


def gen_periodic_eight(n_demos: int = 2, n_cycles: int = 3,
                       noise_scale: float = 0.02, seed: int = 0,
                       points_per_cycle: int = 400,
                       period: float = 4.0) -> TaskSpec:
    """Periodic figure-eight task: each demo repeats the cycle n_cycles
    times; the noiseless base is exactly cycle-periodic."""
    if n_cycles < 2:
        raise ValueError("n_cycles must be >= 2")
    if n_demos < 2:
        raise ValueError("n_demos must be >= 2")
    n = points_per_cycle * n_cycles + 1
    th = np.linspace(np.pi / 2, np.pi / 2 + 2 * np.pi * n_cycles, n)
    base = np.stack([_EIGHT_A * np.sin(th), _EIGHT_B * np.sin(2 * th)], axis=1)
    u = np.linspace(0.0, 1.0, n)
    rng = np.random.default_rng(seed)
    demos = [Trajectory(base + _smooth_noise(u, 2, noise_scale, rng),
                        np.linspace(0.0, period * n_cycles, n))
             for _ in range(n_demos)]
    pts = np.vstack([d.points for d in demos])
    return TaskSpec(name="periodic-eight", mode="periodic", dimension=2,
                    demos=demos, bounds=_bounds_with_margin(pts), period=period)
