// Playground entry point: wires the socket client, the frame buffer, the
// pointer tools, and the render loop together.

import { SessionClient, SocketLike } from "./client.js";
import { FrameBuffer } from "./frames.js";
import {
  CommandRequest,
  DragTeleport,
  FrameShiftDrag,
  ObstacleTool,
} from "./gestures.js";
import type { StateFrame } from "./protocol.js";
import { drawSession, Overlays } from "./render.js";
import { CanvasTransform } from "./transform.js";

type Tool = "drag" | "obstacle" | "frame" | "goal";

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = document.getElementById("status")!;
const fpsEl = document.getElementById("fps")!;
const urlInput = document.getElementById("url") as HTMLInputElement;

let client: SessionClient | null = null;
let tf: CanvasTransform | null = null;
const frames = new FrameBuffer();
const drag = new DragTeleport();
const frameDrag = new FrameShiftDrag();
const obstacles = new ObstacleTool();
let tool: Tool = "drag";
let running = false;
const overlays: Overlays = {
  demos: [],
  contour: null,
  obstacles: obstacles.obstacles,
  goal: null,
  frameOffset: [0, 0],
  warning: null,
  stale: false,
};

function setStatus(text: string): void {
  statusEl.textContent = text;
}

async function sendAll(cmds: CommandRequest[]): Promise<void> {
  if (!client) return;
  for (const c of cmds) {
    try {
      const reply = await client.send(c.type, c.payload);
      applyAck(c, reply as Record<string, unknown>);
    } catch (e) {
      overlays.warning = String(e);
    }
  }
}

function applyAck(cmd: CommandRequest, reply: Record<string, unknown>): void {
  if (cmd.type === "add-obstacle" && typeof reply.obstacle_id === "number") {
    const p = cmd.payload!;
    obstacles.added(
      reply.obstacle_id,
      p.center as number[],
      p.radius as number,
    );
  } else if (cmd.type === "move-obstacle") {
    const p = cmd.payload!;
    obstacles.moved(p.id as number, p.center as number[]);
  } else if (cmd.type === "remove-obstacle") {
    obstacles.removed(cmd.payload!.id as number);
  } else if (cmd.type === "shift-frame") {
    const d = cmd.payload!.delta as number[];
    overlays.frameOffset = [
      overlays.frameOffset[0] + d[0],
      overlays.frameOffset[1] + d[1],
    ];
  } else if (cmd.type === "set-goal") {
    overlays.goal = (cmd.payload?.position as number[]) ?? null;
  } else if (cmd.type === "start") {
    running = true;
  } else if (cmd.type === "pause") {
    running = false;
  }
  overlays.obstacles = obstacles.obstacles;
}

function connect(url: string): void {
  const sock = new WebSocket(url) as unknown as SocketLike;
  client = new SessionClient(sock);
  overlays.stale = false;
  setStatus(`connecting to ${url} ...`);
  (sock as unknown as WebSocket).onopen = () => setStatus("connected");
  client.onClose = () => {
    overlays.stale = true;
    setStatus("disconnected — reconnect to resume");
  };
  client.onFrame = (frame: StateFrame) => {
    frames.push(frame);
    if (frame.terminated) {
      running = false;
      setStatus(`terminated at step ${frame.step}`);
    }
  };
  client.onServerError = (err) => {
    overlays.warning = `${err.code}: ${err.message}`;
    if (err.code === "StuckError") running = false;
  };
  waitForHello();
}

async function waitForHello(): Promise<void> {
  for (let i = 0; i < 100 && client && !client.hello; i++) {
    await new Promise((r) => setTimeout(r, 50));
  }
  if (!client || !client.hello) {
    setStatus("no hello from server");
    return;
  }
  const hello = client.hello;
  if (hello.model.dim !== 2) {
    setStatus("playground supports 2D models only");
    return;
  }
  tf = new CanvasTransform(hello.model.bounds, {
    width: canvas.width,
    height: canvas.height,
  });
  frames.clear();
  overlays.frameOffset = [0, 0];
  const start = hello.nominal[0];
  await sendAll([{ type: "set-start", payload: { x: start } }]);
  setStatus(`ready (s0=${hello.model.s0.toFixed(2)}, ${hello.model.mode})`);
  refreshContour();
}

// safe-set boundary at the current phase, refreshed at 5 Hz
async function refreshContour(): Promise<void> {
  while (client && client.hello) {
    const frame = frames.latest();
    if (frame && !overlays.stale) {
      try {
        const reply = await client.send("get-contour", { s: frame.s });
        overlays.contour = (reply as { points?: number[][] }).points ?? null;
      } catch {
        // keep the previous contour on transient errors
      }
    }
    await new Promise((r) => setTimeout(r, 200));
  }
}

// -- pointer handling -------------------------------------------------------

function canvasPos(ev: MouseEvent): [number, number] {
  const r = canvas.getBoundingClientRect();
  return [ev.clientX - r.left, ev.clientY - r.top];
}

canvas.addEventListener("contextmenu", (ev) => ev.preventDefault());

canvas.addEventListener("mousedown", (ev) => {
  if (!client || !tf || !client.hello) return;
  const [px, py] = canvasPos(ev);
  const wp = tf.toWorkspace(px, py);
  if (tool === "drag") {
    void sendAll(drag.begin(px, py, running));
  } else if (tool === "frame") {
    frameDrag.begin(px, py);
  } else if (tool === "obstacle") {
    void sendAll(obstacles.press(wp, ev.button === 2));
  } else if (tool === "goal") {
    void sendAll([
      { type: "set-goal", payload: { position: wp, strength: 1.0 } },
    ]);
  }
});

canvas.addEventListener("mouseup", (ev) => {
  if (!client || !tf || !client.hello) return;
  const [px, py] = canvasPos(ev);
  if (tool === "drag") {
    const frame = frames.latest();
    if (!frame) return;
    const res = drag.end(px, py, frame.x, tf, client.hello.model.bounds);
    overlays.warning = res.warning;
    void sendAll(res.commands);
  } else if (tool === "frame") {
    void sendAll(frameDrag.end(px, py, tf));
  } else if (tool === "obstacle") {
    void sendAll(obstacles.release(tf.toWorkspace(px, py)));
  }
});

// -- controls ---------------------------------------------------------------

function bindButton(id: string, fn: () => void): void {
  document.getElementById(id)!.addEventListener("click", fn);
}

bindButton("connect", () => connect(urlInput.value));
bindButton("run", () => void sendAll([{ type: "start" }]));
bindButton("pause", () => void sendAll([{ type: "pause" }]));
bindButton("reset", () => {
  frames.clear();
  void sendAll([{ type: "reset" }]);
});
bindButton("export", async () => {
  if (!client) return;
  const schedule = await client.exportSchedule();
  const blob = new Blob([JSON.stringify(schedule, null, 1)], {
    type: "application/json",
  });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = "schedule.json";
  a.click();
});

for (const t of ["drag", "obstacle", "frame", "goal"] as Tool[]) {
  document.getElementById(`tool-${t}`)!.addEventListener("click", () => {
    tool = t;
    setStatus(`tool: ${t}`);
  });
}

// optional demo overlay from a local task file (never used for dynamics)
const fileInput = document.getElementById("taskfile") as HTMLInputElement;
fileInput.addEventListener("change", async () => {
  const f = fileInput.files?.[0];
  if (!f) return;
  try {
    const doc = JSON.parse(await f.text());
    overlays.demos = (doc.demos ?? []).map(
      (d: { points: number[][] }) => d.points,
    );
  } catch {
    overlays.warning = "could not parse task file";
  }
});

// -- render loop ------------------------------------------------------------

let frameCount = 0;
let fpsWindowStart = performance.now();

function renderLoop(): void {
  if (client && client.hello && tf) {
    drawSession(ctx, tf, client.hello, frames.latest(), frames.traceTail(), overlays);
  }
  frameCount += 1;
  const now = performance.now();
  if (now - fpsWindowStart >= 1000) {
    fpsEl.textContent = `${frameCount} fps`;
    frameCount = 0;
    fpsWindowStart = now;
  }
  requestAnimationFrame(renderLoop);
}

requestAnimationFrame(renderLoop);
setStatus("not connected");
