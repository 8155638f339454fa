// Canvas rendering of the session view.  Pure drawing: everything shown
// comes from server frames and acked edits, nothing is simulated here.

import type { HelloMsg, StateFrame } from "./protocol.js";
import { CanvasTransform, phaseGauge } from "./transform.js";
import type { ObstacleView } from "./gestures.js";

export interface Overlays {
  demos: number[][][]; // optional, loaded from a local task file
  contour: number[][] | null;
  obstacles: ObstacleView[];
  goal: number[] | null;
  frameOffset: number[]; // accumulated shift-frame deltas
  warning: string | null;
  stale: boolean;
}

function polyline(
  ctx: CanvasRenderingContext2D,
  tf: CanvasTransform,
  pts: readonly number[][],
  close = false,
): void {
  if (pts.length < 2) return;
  ctx.beginPath();
  const [x0, y0] = tf.toPixels(pts[0]);
  ctx.moveTo(x0, y0);
  for (let i = 1; i < pts.length; i++) {
    const [x, y] = tf.toPixels(pts[i]);
    ctx.lineTo(x, y);
  }
  if (close) ctx.closePath();
  ctx.stroke();
}

function shift(pts: readonly number[][], off: number[]): number[][] {
  if (off[0] === 0 && off[1] === 0) return pts as number[][];
  return pts.map((p) => [p[0] + off[0], p[1] + off[1]]);
}

export function drawSession(
  ctx: CanvasRenderingContext2D,
  tf: CanvasTransform,
  hello: HelloMsg,
  frame: StateFrame | null,
  tail: readonly number[][],
  overlays: Overlays,
): void {
  const w = tf.view.width;
  const h = tf.view.height;
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#181c20";
  ctx.fillRect(0, 0, w, h);

  const off = overlays.frameOffset;

  ctx.lineWidth = 1;
  ctx.strokeStyle = "#2e3b44";
  for (const demo of overlays.demos) polyline(ctx, tf, shift(demo, off));

  ctx.strokeStyle = "#5a8cc0";
  ctx.lineWidth = 2;
  polyline(ctx, tf, shift(hello.nominal, off), hello.model.mode === "periodic");

  if (overlays.contour) {
    ctx.strokeStyle = "#3f6f4f";
    ctx.lineWidth = 1;
    polyline(ctx, tf, shift(overlays.contour, off), true);
  }

  for (const ob of overlays.obstacles) {
    const [cx, cy] = tf.toPixels(ob.center);
    ctx.beginPath();
    ctx.arc(cx, cy, ob.radius * tf.pixelsPerUnit(), 0, 2 * Math.PI);
    ctx.fillStyle = "rgba(200, 80, 80, 0.35)";
    ctx.fill();
    ctx.strokeStyle = "#c05050";
    ctx.stroke();
  }

  if (overlays.goal) {
    const [gx, gy] = tf.toPixels(overlays.goal);
    ctx.strokeStyle = "#d0b050";
    ctx.beginPath();
    ctx.moveTo(gx - 6, gy);
    ctx.lineTo(gx + 6, gy);
    ctx.moveTo(gx, gy - 6);
    ctx.lineTo(gx, gy + 6);
    ctx.stroke();
  }

  ctx.strokeStyle = "#b0b8a0";
  ctx.lineWidth = 1.5;
  polyline(ctx, tf, tail);

  if (frame) {
    const [ax, ay] = tf.toPixels(frame.x);
    ctx.beginPath();
    ctx.arc(ax, ay, 6, 0, 2 * Math.PI);
    ctx.fillStyle = frame.terminated ? "#70c070" : "#e0e0e0";
    ctx.fill();

    drawGauge(ctx, w, phaseGauge(frame.s, hello.model));
    ctx.fillStyle = "#9aa5ad";
    ctx.font = "12px monospace";
    ctx.textAlign = "left";
    ctx.fillText(
      `step ${frame.step}  s=${frame.s.toFixed(3)}  ` +
        `phi_nom=${frame.phi_nom.toFixed(3)}  ` +
        `phi_safe=${frame.phi_safe.toFixed(3)}  phi=${frame.phi.toFixed(3)}`,
      10,
      h - 10,
    );
  }

  if (overlays.stale) {
    ctx.fillStyle = "#c0a040";
    ctx.font = "13px monospace";
    ctx.textAlign = "left";
    ctx.fillText("disconnected — view frozen", 10, 20);
  }
  if (overlays.warning) {
    ctx.fillStyle = "#c05050";
    ctx.font = "13px monospace";
    ctx.textAlign = "left";
    ctx.fillText(overlays.warning, 10, 38);
  }
}

function drawGauge(
  ctx: CanvasRenderingContext2D,
  width: number,
  value: number,
): void {
  const gw = 140;
  const gx = width - gw - 14;
  const gy = 14;
  ctx.fillStyle = "#242a30";
  ctx.fillRect(gx, gy, gw, 12);
  ctx.fillStyle = "#5a8cc0";
  ctx.fillRect(gx, gy, gw * value, 12);
  ctx.strokeStyle = "#4a555f";
  ctx.strokeRect(gx, gy, gw, 12);
  ctx.fillStyle = "#9aa5ad";
  ctx.font = "11px monospace";
  ctx.textAlign = "right";
  ctx.fillText(`s̃ = ${value.toFixed(2)}`, gx - 6, gy + 10);
}
