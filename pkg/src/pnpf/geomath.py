"""Geometric and alignment primitives shared across the library.

All functions are pure and operate on plain numpy arrays (points stacked
row-wise, shape (N, d)).  The :class:`Trajectory` wrapper adds optional
timestamps and validation; every function accepts either a Trajectory or a
bare array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.spatial.distance import cdist

__all__ = [
    "Trajectory",
    "UnitQuaternion",
    "dtw_distance",
    "dtw_align",
    "frechet_distance",
    "arc_length",
    "nearest_index",
    "positional_encoding",
    "quat_log_map",
    "quat_exp_map",
    "quat_trajectory_to_axis_angle",
    "axis_angle_trajectory_to_quat",
]


@dataclass(frozen=True)
class Trajectory:
    """A time-stamped state trajectory: points shape (N, d), N >= 2."""

    points: np.ndarray
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or len(pts) < 2:
            raise ValueError("trajectory needs at least 2 points of shape (N, d)")
        object.__setattr__(self, "points", pts)
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps, dtype=float)
            if len(ts) != len(pts):
                raise ValueError("timestamps length must match points")
            if np.any(np.diff(ts) <= 0):
                raise ValueError("timestamps must be strictly increasing")
            object.__setattr__(self, "timestamps", ts)

    def __len__(self):
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _as_points(t) -> np.ndarray:
    if isinstance(t, Trajectory):
        return t.points
    a = np.asarray(t, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    return a


def _check_pair(a: np.ndarray, b: np.ndarray):
    if len(a) == 0 or len(b) == 0:
        raise ValueError("empty trajectory")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")


@njit(cache=True)
def _dtw_matrix(cost):  # pragma: no cover - numba
    n, m = cost.shape
    acc = np.empty((n + 1, m + 1))
    acc[:, :] = np.inf
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = cost[i - 1, j - 1] + best
    return acc


def dtw_distance(a, b) -> float:
    """Classic DTW with Euclidean local cost and step pattern {(1,0),(0,1),(1,1)}."""
    pa, pb = _as_points(a), _as_points(b)
    _check_pair(pa, pb)
    cost = cdist(pa, pb)
    return float(_dtw_matrix(cost)[len(pa), len(pb)])


def dtw_align(reference, query) -> list[tuple[int, int]]:
    """Optimal warping path from (0,0) to (|ref|-1, |query|-1).

    Backtracking prefers the diagonal step on ties, so identical inputs give
    the pure diagonal path.
    """
    pr, pq = _as_points(reference), _as_points(query)
    _check_pair(pr, pq)
    acc = _dtw_matrix(cdist(pr, pq))
    i, j = len(pr), len(pq)
    path = [(i - 1, j - 1)]
    while i > 1 or j > 1:
        if i == 1:
            j -= 1
        elif j == 1:
            i -= 1
        else:
            d, u, l = acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
            if d <= u and d <= l:
                i, j = i - 1, j - 1
            elif u <= l:
                i -= 1
            else:
                j -= 1
        path.append((i - 1, j - 1))
    path.reverse()
    return path


@njit(cache=True)
def _frechet_matrix(cost):  # pragma: no cover - numba
    n, m = cost.shape
    acc = np.empty((n, m))
    acc[0, 0] = cost[0, 0]
    for j in range(1, m):
        acc[0, j] = max(acc[0, j - 1], cost[0, j])
    for i in range(1, n):
        acc[i, 0] = max(acc[i - 1, 0], cost[i, 0])
        for j in range(1, m):
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = max(best, cost[i, j])
    return acc


def frechet_distance(a, b) -> float:
    """Discrete Fréchet distance (min over couplings of the max pair distance)."""
    pa, pb = _as_points(a), _as_points(b)
    _check_pair(pa, pb)
    return float(_frechet_matrix(cdist(pa, pb))[len(pa) - 1, len(pb) - 1])


def arc_length(t, start: int = 0, stop: int | None = None) -> float:
    """Polyline length between indices start and stop (inclusive), left-to-right sum."""
    pts = _as_points(t)
    if stop is None:
        stop = len(pts) - 1
    if not (0 <= start <= stop < len(pts)):
        raise IndexError(f"arc_length indices out of range: {start}..{stop} of {len(pts)}")
    total = 0.0
    seg = np.linalg.norm(np.diff(pts[start : stop + 1], axis=0), axis=1)
    for v in seg:  # fixed summation order for the additivity invariant
        total += float(v)
    return total


def nearest_index(t, x) -> int:
    """Index of the trajectory point closest to x; ties go to the lowest index."""
    pts = _as_points(t)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != pts.shape[1]:
        raise ValueError(f"dimension mismatch: point {x.shape[-1]} vs trajectory {pts.shape[1]}")
    d2 = np.einsum("ij,ij->i", pts - x, pts - x)
    return int(np.argmin(d2))


def positional_encoding(v, num_frequencies: int) -> np.ndarray:
    """Fourier features: per component c and octave j, [sin(2^j pi v_c), cos(2^j pi v_c)].

    Supports batched input: shape (..., d) -> (..., 2 * num_frequencies * d).
    """
    if num_frequencies < 1:
        raise ValueError("num_frequencies must be >= 1")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    freqs = (2.0 ** np.arange(num_frequencies)) * np.pi  # (F,)
    ang = v[..., :, None] * freqs  # (..., d, F)
    enc = np.stack([np.sin(ang), np.cos(ang)], axis=-1)  # (..., d, F, 2)
    return enc.reshape(*v.shape[:-1], -1)


# ---------------------------------------------------------------------------
# Quaternions: hemisphere-canonical (w >= 0), with Log/Exp tangent-space maps.
# ---------------------------------------------------------------------------

_UNIT_TOL = 1e-9
_SMALL_ANGLE = 1e-8


@dataclass(frozen=True)
class UnitQuaternion:
    """Unit quaternion (w, x, y, z), canonicalized to the w >= 0 hemisphere."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if abs(n - 1.0) > 1e-6:
            raise ValueError(f"quaternion norm {n} is not 1")
        sign = -1.0 if self.w < 0 else 1.0
        for name, val in zip("wxyz", (self.w, self.x, self.y, self.z)):
            object.__setattr__(self, name, sign * val / n)

    @classmethod
    def from_array(cls, arr) -> "UnitQuaternion":
        w, x, y, z = np.asarray(arr, dtype=float)
        return cls(w, x, y, z)

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other: "UnitQuaternion") -> "UnitQuaternion":
        w1, v1 = self.w, np.array([self.x, self.y, self.z])
        w2, v2 = other.w, np.array([other.x, other.y, other.z])
        w = w1 * w2 - v1 @ v2
        v = w1 * v2 + w2 * v1 + np.cross(v1, v2)
        return UnitQuaternion(w, *v)


def _check_unit(q: UnitQuaternion):
    n = math.sqrt(q.w**2 + q.x**2 + q.y**2 + q.z**2)
    if abs(n - 1.0) > 1e-6:
        raise ValueError("non-unit quaternion")


def quat_log_map(q: UnitQuaternion, q_ref: UnitQuaternion) -> np.ndarray:
    """Axis-angle of the relative rotation q * conj(q_ref), with |r| <= pi."""
    _check_unit(q)
    _check_unit(q_ref)
    rel = q * q_ref.conjugate()
    v = np.array([rel.x, rel.y, rel.z])
    vn = float(np.linalg.norm(v))
    if vn < _SMALL_ANGLE:
        return 2.0 * v  # theta ~ 2*vn / vn * v = 2v for w ~ 1
    theta = 2.0 * math.atan2(vn, rel.w)  # rel.w >= 0 -> theta in [0, pi]
    return (theta / vn) * v


def quat_exp_map(r, q_ref: UnitQuaternion) -> UnitQuaternion:
    """Inverse of quat_log_map at q_ref: Exp(r) * q_ref."""
    r = np.asarray(r, dtype=float)
    theta = float(np.linalg.norm(r))
    if theta < _SMALL_ANGLE:
        half = 0.5 * r  # sin(theta/2)/theta ~ 1/2
        w = math.sqrt(max(0.0, 1.0 - float(half @ half)))
        exp_q = UnitQuaternion(w, *half)
    else:
        axis = r / theta
        exp_q = UnitQuaternion(math.cos(theta / 2.0), *(math.sin(theta / 2.0) * axis))
    return exp_q * q_ref


def quat_trajectory_to_axis_angle(quats: list[UnitQuaternion], q_ref: UnitQuaternion) -> np.ndarray:
    """Map a quaternion trajectory to tangent space at q_ref with sign continuity.

    Consecutive raw quaternions are flipped to the hemisphere of their
    predecessor before taking the log, so the resulting (N, 3) axis-angle
    sequence is continuous for any continuous rotation path.
    """
    out = np.empty((len(quats), 3))
    prev = None
    for i, q in enumerate(quats):
        arr = q.as_array()
        if prev is not None and float(arr @ prev) < 0:
            arr = -arr
        prev = arr
        # log of (q * conj(ref)) computed directly from the sign-continuous array
        qc = q_ref.conjugate()
        w1, v1 = arr[0], arr[1:]
        w2, v2 = qc.w, np.array([qc.x, qc.y, qc.z])
        w = w1 * w2 - v1 @ v2
        v = w1 * v2 + w2 * v1 + np.cross(v1, v2)
        vn = float(np.linalg.norm(v))
        if vn < _SMALL_ANGLE:
            out[i] = 2.0 * v * (1.0 if w >= 0 else -1.0)
        else:
            theta = 2.0 * math.atan2(vn, w)  # w signed: theta in [0, 2pi)
            if theta > math.pi:
                theta -= 2.0 * math.pi
            out[i] = (theta / vn) * v
    return out


def axis_angle_trajectory_to_quat(rs: np.ndarray, q_ref: UnitQuaternion) -> list[UnitQuaternion]:
    return [quat_exp_map(r, q_ref) for r in np.asarray(rs, dtype=float)]
