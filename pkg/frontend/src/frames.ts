// Frame buffer between the socket and the render loop.  The server streams
// at its tick rate; the renderer samples the latest frame per animation
// frame, so the rendered step sequence is a monotone subsequence of the
// server steps.  Stale frames (step <= the newest seen) are discarded.

import type { StateFrame } from "./protocol.js";

export class FrameBuffer {
  private last: StateFrame | null = null;
  private tail: number[][] = []; // trace tail in workspace coordinates
  private tailLimit: number;
  dropped = 0; // stale frames discarded

  constructor(tailLimit = 2000) {
    this.tailLimit = tailLimit;
  }

  push(frame: StateFrame): boolean {
    if (this.last !== null && frame.step <= this.last.step) {
      this.dropped += 1;
      return false;
    }
    this.last = frame;
    this.tail.push(frame.x);
    if (this.tail.length > this.tailLimit) {
      this.tail.splice(0, this.tail.length - this.tailLimit);
    }
    return true;
  }

  latest(): StateFrame | null {
    return this.last;
  }

  traceTail(): readonly number[][] {
    return this.tail;
  }

  clear(): void {
    this.last = null;
    this.tail = [];
    this.dropped = 0;
  }
}
