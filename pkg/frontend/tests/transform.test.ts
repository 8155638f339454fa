import { describe, expect, it } from "vitest";

import {
  CanvasTransform,
  clampToBounds,
  phaseGauge,
} from "../src/transform.js";

const bounds = [
  [-1, 1],
  [-1, 1],
];
const view = { width: 200, height: 200 };

describe("CanvasTransform", () => {
  it("round-trips workspace points", () => {
    const tf = new CanvasTransform(bounds, view);
    for (const p of [[0, 0], [0.5, -0.3], [-1, 1]]) {
      const [px, py] = tf.toPixels(p);
      const back = tf.toWorkspace(px, py);
      expect(back[0]).toBeCloseTo(p[0], 10);
      expect(back[1]).toBeCloseTo(p[1], 10);
    }
  });

  it("flips y between canvas and workspace", () => {
    const tf = new CanvasTransform(bounds, view);
    const [, pyLow] = tf.toPixels([0, -1]);
    const [, pyHigh] = tf.toPixels([0, 1]);
    expect(pyLow).toBeGreaterThan(pyHigh);
  });

  it("converts a 100 pixel drag at 0.01 units/px to delta magnitude 1", () => {
    // margin 0 and a square viewport give an exact 0.01 units/px scale
    const tf = new CanvasTransform(bounds, view, 0);
    expect(tf.scale).toBeCloseTo(0.01, 12);
    const [dx, dy] = tf.deltaToWorkspace(100, 0);
    expect(Math.hypot(dx, dy)).toBeCloseTo(1.0, 12);
  });

  it("keeps the aspect ratio on non-square viewports", () => {
    const tf = new CanvasTransform(bounds, { width: 400, height: 200 });
    const [x0] = tf.toPixels([-1, 0]);
    const [x1] = tf.toPixels([1, 0]);
    const [, y0] = tf.toPixels([0, -1]);
    const [, y1] = tf.toPixels([0, 1]);
    expect(Math.abs(x1 - x0)).toBeCloseTo(Math.abs(y1 - y0), 10);
  });
});

describe("clampToBounds", () => {
  it("passes interior points through", () => {
    const r = clampToBounds([0.2, -0.4], bounds);
    expect(r.clamped).toBe(false);
    expect(r.point).toEqual([0.2, -0.4]);
  });

  it("clamps and flags exterior points", () => {
    const r = clampToBounds([2, -3], bounds);
    expect(r.clamped).toBe(true);
    expect(r.point).toEqual([1, -1]);
  });
});

describe("phaseGauge", () => {
  const p2p = { mode: "point-to-point", s0: 4, s_period: null };

  it("reads 1.0 at s = s0", () => {
    expect(phaseGauge(4, p2p)).toBe(1);
  });

  it("clamps outside [0, s0]", () => {
    expect(phaseGauge(5, p2p)).toBe(1);
    expect(phaseGauge(-1, p2p)).toBe(0);
  });

  it("wraps for periodic models", () => {
    const per = { mode: "periodic", s0: 3, s_period: 3 };
    expect(phaseGauge(7.5, per)).toBeCloseTo(0.5, 12);
    expect(phaseGauge(-0.75, per)).toBeCloseTo(0.75, 12);
  });
});
