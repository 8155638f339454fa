"""Composition of the full phase-varying potential: nominal energy plus a
phase-weighted safety energy, with optional obstacle and goal terms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energyfields import eval_field
from .model import PnpfModel

__all__ = [
    "Obstacle",
    "PotentialParams",
    "lambda_safety",
    "compose",
    "compose_periodic",
    "obstacle_goal_terms",
    "ExtraTerms",
    "Composition",
]


@dataclass(frozen=True)
class Obstacle:
    """Repulsive column: acts on the leading len(center) state coordinates."""

    center: tuple
    radius: float
    strength: float = 1.0

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("obstacle radius must be positive")


@dataclass
class PotentialParams:
    k_safety: float = 1.0
    alpha: float = 1.0  # control gain
    goal_threshold: float = 0.0  # phase below which the attractive term is on
    obstacles: list = field(default_factory=list)
    goal: tuple | None = None  # (state, strength)
    influence_factor: float = 3.0  # d_influence = factor * radius
    d_min_factor: float = 0.01  # repulsion distance clamp = factor * radius

    def __post_init__(self):
        if self.k_safety < 0 or self.alpha < 0:
            raise ValueError("k_safety and alpha must be >= 0")


def lambda_safety(s, s0: float):
    """Phase-dependent safety multiplier 1 + (1 - s/s0)^10, s/s0 clamped to [0,1]."""
    if s0 <= 0:
        raise ValueError("s0 must be positive")
    s_norm = np.clip(np.asarray(s, dtype=float) / s0, 0.0, 1.0)
    out = 1.0 + (1.0 - s_norm) ** 10
    return float(out) if out.ndim == 0 else out


@dataclass
class ExtraTerms:
    value: np.ndarray  # (B,) or scalar
    grad: np.ndarray  # (B, d) or (d,)
    inside_obstacle: np.ndarray  # bool, same batch shape as value


@dataclass
class Composition:
    phi: np.ndarray
    grad: np.ndarray
    phi_nominal: np.ndarray
    phi_safety: np.ndarray
    phi_extra: np.ndarray
    inside_obstacle: np.ndarray


def obstacle_goal_terms(x, s, params: PotentialParams) -> ExtraTerms:
    """Khatib-style repulsive terms per obstacle plus a thresholded quadratic
    attractor toward the goal.

    Repulsion: strength * (1/d - 1/d_inf)^2 for surface distance d < d_inf,
    identically zero (value and gradient) beyond d_inf; d is clamped below at
    d_min, so a state inside an obstacle sees a finite push outward and is
    flagged.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if len(s) == 1 and len(xb) > 1:
        s = np.full(len(xb), s[0])
    val = np.zeros(len(xb))
    grad = np.zeros_like(xb)
    inside = np.zeros(len(xb), dtype=bool)
    for obs in params.obstacles:
        c = np.asarray(obs.center, dtype=float)
        nd = len(c)
        delta = xb[:, :nd] - c
        dist_c = np.linalg.norm(delta, axis=1)
        d = dist_c - obs.radius
        d_inf = params.influence_factor * obs.radius
        d_min = params.d_min_factor * obs.radius
        inside |= d <= 0
        d_eff = np.maximum(d, d_min)
        active = d < d_inf
        inv = np.where(active, 1.0 / d_eff - 1.0 / d_inf, 0.0)
        val += obs.strength * inv**2
        # direction away from the center; zero direction at the exact center
        safe_dist = np.where(dist_c > 1e-12, dist_c, 1.0)
        direction = delta / safe_dist[:, None]
        clamped = d <= d_min  # no distance change within the clamp band
        mag = np.where(active & ~clamped, -2.0 * obs.strength * inv / d_eff**2, 0.0)
        # inside the clamp band the push is the finite clamped repulsion slope
        mag = np.where(active & clamped, -2.0 * obs.strength * inv / d_eff**2, mag)
        grad[:, :nd] += mag[:, None] * direction
    if params.goal is not None:
        g_state, g_strength = params.goal
        g_state = np.asarray(g_state, dtype=float)
        on = s < params.goal_threshold
        diff = xb - g_state
        val += np.where(on, 0.5 * g_strength * np.einsum("ij,ij->i", diff, diff), 0.0)
        grad += np.where(on[:, None], g_strength * diff, 0.0)
    if single:
        return ExtraTerms(float(val[0]), grad[0], bool(inside[0]))
    return ExtraTerms(val, grad, inside)


def _eval_fields(x, s, model: PnpfModel):
    nom_v, nom_g = eval_field(model.nominal_field, x, s)
    safe_v, safe_g = eval_field(model.safety_field, x, s)
    return nom_v, nom_g, safe_v, safe_g


def compose(x, s, model: PnpfModel, params: PotentialParams) -> Composition:
    """Point-to-point potential: phi_nominal + k * Lambda(s) * phi_safety,
    plus any obstacle/goal terms.  Batched when x is (B, d)."""
    nom_v, nom_g, safe_v, safe_g = _eval_fields(x, s, model)
    lam = lambda_safety(s, model.s0)
    extra = obstacle_goal_terms(x, s, params)
    k = params.k_safety * lam
    phi = nom_v + k * safe_v + extra.value
    k_col = k if np.ndim(k) == 0 else np.asarray(k)[:, None]
    grad = nom_g + k_col * safe_g + extra.grad
    return Composition(phi, grad, nom_v, safe_v, extra.value, extra.inside_obstacle)


def compose_periodic(x, s, model: PnpfModel, params: PotentialParams) -> Composition:
    """Periodic potential: for s >= 0 nominal + k * safety (no Lambda factor);
    for s < 0 the safety term alone, so the motion settles once the cycles
    conclude."""
    nom_v, nom_g, safe_v, safe_g = _eval_fields(x, s, model)
    extra = obstacle_goal_terms(x, s, params)
    k = params.k_safety
    active = np.asarray(s, dtype=float) >= 0.0
    if np.ndim(nom_v) == 0:
        nom_v = nom_v if active else 0.0
        nom_g = nom_g if active else np.zeros_like(nom_g)
    else:
        nom_v = np.where(active, nom_v, 0.0)
        nom_g = np.where(np.atleast_1d(active)[:, None], nom_g, 0.0)
    phi = nom_v + k * safe_v + extra.value
    grad = nom_g + k * safe_g + extra.grad
    return Composition(phi, grad, nom_v, safe_v, extra.value, extra.inside_obstacle)
