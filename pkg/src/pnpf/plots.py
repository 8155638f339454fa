"""Minimal SVG emission for traces and sweep summaries (CLI convenience)."""

from __future__ import annotations

import numpy as np

__all__ = ["trace_svg", "sweep_svg"]

_W, _H, _PAD = 640, 480, 40


def _fit(points: np.ndarray):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    scale = min((_W - 2 * _PAD) / span[0], (_H - 2 * _PAD) / span[1])

    def tx(p):
        q = (np.asarray(p) - lo) * scale
        return q[0] + _PAD, _H - _PAD - q[1]

    return tx


def _polyline(tx, pts, color, width=1.5, dash=None):
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in (tx(p) for p in pts))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline fill="none" stroke="{color}" stroke-width="{width}"'
            f'{extra} points="{coords}"/>')


def trace_svg(trace, model, path):
    """Rollout trace over the nominal trajectory, first two coordinates."""
    xs = np.asarray(trace.x)[:, :2]
    nom = np.asarray(model.nominal.core_points)[:, :2]
    tx = _fit(np.vstack([xs, nom]))
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>',
             _polyline(tx, nom, "#999999", 1.0, dash="4,3"),
             _polyline(tx, xs, "#1f5fbf", 1.5)]
    x0, y0 = tx(xs[0])
    x1, y1 = tx(xs[-1])
    parts.append(f'<circle cx="{x0:.2f}" cy="{y0:.2f}" r="4" fill="#2aa02a"/>')
    parts.append(f'<circle cx="{x1:.2f}" cy="{y1:.2f}" r="4" fill="#d62728"/>')
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts))


def sweep_svg(result: dict, path):
    """Per-phase success fractions as a line chart on [0, 1]."""
    vals = np.asarray(result["per_phase_success"], dtype=float)
    n = len(vals)
    pts = np.stack([np.arange(n), vals], axis=1)
    tx = _fit(np.array([[0.0, 0.0], [max(n - 1, 1), 1.0]]))
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>',
             _polyline(tx, [[0, 1.0], [n - 1, 1.0]], "#cccccc", 1.0, dash="2,2"),
             _polyline(tx, pts, "#1f5fbf", 1.5)]
    frac = result.get("success_fraction", float(np.mean(vals)))
    parts.append(f'<text x="{_PAD}" y="{_PAD - 10}" font-family="monospace" '
                 f'font-size="13">success fraction {frac:.4f}'
                 f' (safeguard {"on" if result.get("safeguard") else "off"})'
                 f'</text>')
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts))
