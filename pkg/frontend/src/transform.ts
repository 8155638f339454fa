// Workspace <-> pixel transform: uniform scale, centered, y up in the
// workspace but down in canvas coordinates.

export interface Viewport {
  width: number;
  height: number;
}

export class CanvasTransform {
  readonly scale: number; // workspace units per pixel
  readonly cx: number; // workspace point mapped to the canvas center
  readonly cy: number;
  readonly view: Viewport;

  constructor(bounds: number[][], view: Viewport, margin = 0.05) {
    if (bounds.length !== 2) {
      throw new Error("canvas transform needs 2D bounds");
    }
    const w = bounds[0][1] - bounds[0][0];
    const h = bounds[1][1] - bounds[1][0];
    const usableW = view.width * (1 - 2 * margin);
    const usableH = view.height * (1 - 2 * margin);
    this.scale = Math.max(w / usableW, h / usableH);
    this.cx = (bounds[0][0] + bounds[0][1]) / 2;
    this.cy = (bounds[1][0] + bounds[1][1]) / 2;
    this.view = view;
  }

  toPixels(p: number[]): [number, number] {
    return [
      this.view.width / 2 + (p[0] - this.cx) / this.scale,
      this.view.height / 2 - (p[1] - this.cy) / this.scale,
    ];
  }

  toWorkspace(px: number, py: number): [number, number] {
    return [
      this.cx + (px - this.view.width / 2) * this.scale,
      this.cy - (py - this.view.height / 2) * this.scale,
    ];
  }

  // pixel delta -> workspace delta (y flips sign)
  deltaToWorkspace(dx: number, dy: number): [number, number] {
    return [dx * this.scale, -dy * this.scale];
  }

  pixelsPerUnit(): number {
    return 1 / this.scale;
  }
}

export function clampToBounds(p: number[], bounds: number[][]): {
  point: number[];
  clamped: boolean;
} {
  let clamped = false;
  const point = p.map((v, i) => {
    const lo = bounds[i][0];
    const hi = bounds[i][1];
    if (v < lo || v > hi) {
      clamped = true;
      return Math.min(Math.max(v, lo), hi);
    }
    return v;
  });
  return { point, clamped };
}

// normalized phase gauge reading in [0, 1]
export function phaseGauge(
  s: number,
  model: { mode: string; s0: number; s_period: number | null },
): number {
  if (model.mode === "periodic" && model.s_period) {
    const wrapped = ((s % model.s_period) + model.s_period) % model.s_period;
    return wrapped / model.s_period;
  }
  return Math.min(Math.max(s / model.s0, 0), 1);
}
