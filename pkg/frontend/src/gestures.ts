// Pointer gesture logic, kept free of DOM so it can be unit tested.  Each
// gesture turns pixel events into a list of protocol commands; the caller
// (main.ts) actually sends them.

import { CanvasTransform, clampToBounds } from "./transform.js";

export interface CommandRequest {
  type: string;
  payload?: Record<string, unknown>;
}

export interface GestureResult {
  commands: CommandRequest[];
  warning: string | null;
}

// Dragging the agent: pause on grab, teleport by the dragged delta on
// release, then resume (when the session was running before the grab).
export class DragTeleport {
  private startPx: [number, number] | null = null;
  private resumeAfter = false;

  begin(px: number, py: number, running: boolean): CommandRequest[] {
    this.startPx = [px, py];
    this.resumeAfter = running;
    return running ? [{ type: "pause" }] : [];
  }

  end(
    px: number,
    py: number,
    agentPos: number[],
    tf: CanvasTransform,
    bounds: number[][],
  ): GestureResult {
    if (this.startPx === null) {
      return { commands: [], warning: null };
    }
    const [sx, sy] = this.startPx;
    this.startPx = null;
    let delta = tf.deltaToWorkspace(px - sx, py - sy);
    let warning: string | null = null;
    const target = clampToBounds(
      [agentPos[0] + delta[0], agentPos[1] + delta[1]],
      bounds,
    );
    if (target.clamped) {
      warning = "drag clamped to workspace bounds";
      delta = [target.point[0] - agentPos[0], target.point[1] - agentPos[1]];
    }
    const commands: CommandRequest[] = [];
    if (delta[0] !== 0 || delta[1] !== 0) {
      commands.push({ type: "teleport", payload: { delta } });
    }
    if (this.resumeAfter) {
      commands.push({ type: "start" });
    }
    return { commands, warning };
  }

  active(): boolean {
    return this.startPx !== null;
  }
}

// Frame-shift tool: drag anywhere moves the whole task frame.
export class FrameShiftDrag {
  private startPx: [number, number] | null = null;

  begin(px: number, py: number): void {
    this.startPx = [px, py];
  }

  end(px: number, py: number, tf: CanvasTransform): CommandRequest[] {
    if (this.startPx === null) return [];
    const [sx, sy] = this.startPx;
    this.startPx = null;
    const delta = tf.deltaToWorkspace(px - sx, py - sy);
    if (delta[0] === 0 && delta[1] === 0) return [];
    return [{ type: "shift-frame", payload: { delta } }];
  }
}

export interface ObstacleView {
  id: number;
  center: number[];
  radius: number;
}

// Obstacle tool: click to place, drag an existing one to move, right-click
// to remove.  Keeps the local obstacle list in sync with acked edits.
export class ObstacleTool {
  obstacles: ObstacleView[] = [];
  defaultRadius: number;
  private dragging: ObstacleView | null = null;

  constructor(defaultRadius = 0.05) {
    this.defaultRadius = defaultRadius;
  }

  hit(p: number[]): ObstacleView | null {
    for (let i = this.obstacles.length - 1; i >= 0; i--) {
      const ob = this.obstacles[i];
      const d = Math.hypot(p[0] - ob.center[0], p[1] - ob.center[1]);
      if (d <= ob.radius) return ob;
    }
    return null;
  }

  press(p: number[], rightButton: boolean): CommandRequest[] {
    const target = this.hit(p);
    if (rightButton) {
      if (target === null) return [];
      return [{ type: "remove-obstacle", payload: { id: target.id } }];
    }
    if (target !== null) {
      this.dragging = target;
      return [];
    }
    return [
      {
        type: "add-obstacle",
        payload: { center: p, radius: this.defaultRadius },
      },
    ];
  }

  release(p: number[]): CommandRequest[] {
    if (this.dragging === null) return [];
    const ob = this.dragging;
    this.dragging = null;
    if (p[0] === ob.center[0] && p[1] === ob.center[1]) return [];
    return [{ type: "move-obstacle", payload: { id: ob.id, center: p } }];
  }

  // apply acked edits to the local view
  added(id: number, center: number[], radius: number): void {
    this.obstacles.push({ id, center, radius });
  }

  moved(id: number, center: number[]): void {
    const ob = this.obstacles.find((o) => o.id === id);
    if (ob) ob.center = center;
  }

  removed(id: number): void {
    this.obstacles = this.obstacles.filter((o) => o.id !== id);
  }
}
