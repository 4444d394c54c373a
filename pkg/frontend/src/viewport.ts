// Top-down (x, y) canvas rendering of the camera path: target frusta tinted
// by owning pass, input cameras in gray, anchors ringed, dependency and
// memory-bank retrieval edges drawn between the cameras involved.

import {
  anchorProducers,
  anchorTargets,
  passColor,
  retrievalEdges,
  targetPassMap,
} from "./coloring";
import type { SessionState } from "./state";
import type { CameraDict, PlanFile } from "./types";
import { cameraForward, cameraPosition } from "./types";

interface Projector {
  toCanvas(x: number, y: number): [number, number];
}

function fitProjector(cameras: CameraDict[], width: number, height: number): Projector {
  let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
  for (const cam of cameras) {
    const p = cameraPosition(cam);
    minX = Math.min(minX, p.x);
    maxX = Math.max(maxX, p.x);
    minY = Math.min(minY, p.y);
    maxY = Math.max(maxY, p.y);
  }
  if (!Number.isFinite(minX)) {
    minX = -1; maxX = 1; minY = -1; maxY = 1;
  }
  const spanX = Math.max(maxX - minX, 1e-6);
  const spanY = Math.max(maxY - minY, 1e-6);
  const margin = 28;
  const scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
  const cx = (minX + maxX) / 2;
  const cy = (minY + maxY) / 2;
  return {
    toCanvas(x: number, y: number): [number, number] {
      // y up in world, down in canvas.
      return [width / 2 + (x - cx) * scale, height / 2 - (y - cy) * scale];
    },
  };
}

function drawFrustum(ctx: CanvasRenderingContext2D, proj: Projector,
                     camera: CameraDict, color: string, ringed: boolean): void {
  const p = cameraPosition(camera);
  const f = cameraForward(camera);
  const angle = Math.atan2(f.y, f.x);
  const [x, y] = proj.toCanvas(p.x, p.y);
  const len = 12;
  const half = 0.42;
  ctx.beginPath();
  ctx.moveTo(x, y);
  ctx.lineTo(x + len * Math.cos(angle - half), y - len * Math.sin(angle - half));
  ctx.lineTo(x + len * Math.cos(angle + half), y - len * Math.sin(angle + half));
  ctx.closePath();
  ctx.fillStyle = color;
  ctx.globalAlpha = 0.75;
  ctx.fill();
  ctx.globalAlpha = 1.0;
  ctx.beginPath();
  ctx.arc(x, y, ringed ? 4.5 : 2.5, 0, 2 * Math.PI);
  ctx.fillStyle = color;
  ctx.fill();
  if (ringed) {
    ctx.strokeStyle = "#222";
    ctx.lineWidth = 1.5;
    ctx.stroke();
  }
}

function anchorCamera(plan: PlanFile, anchorIndex: number): CameraDict {
  return plan.anchor_cameras[anchorIndex];
}

export function drawViewport(canvas: HTMLCanvasElement, state: SessionState): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return; // jsdom has no 2D context; rendering is browser-only
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#fafafa";
  ctx.fillRect(0, 0, width, height);

  const frames = state.trajectory.frames;
  const proj = fitProjector(frames, width, height);
  const plan = state.plan;
  const passMap = plan ? targetPassMap(plan) : new Map<number, number>();
  const anchors = plan ? anchorTargets(plan) : new Set<number>();
  const passCount = plan ? plan.passes.length : 1;

  if (plan) {
    // Memory-bank retrieval edges between bank anchors and the group the
    // consuming pass generates.
    const producers = anchorProducers(plan);
    ctx.strokeStyle = "#9467bd";
    ctx.lineWidth = 1.0;
    ctx.setLineDash([4, 3]);
    for (const edge of retrievalEdges(plan)) {
      const from = cameraPosition(anchorCamera(plan, edge.fromAnchor));
      const pass = plan.passes.find((p) => p.id === edge.toPass);
      if (!pass) continue;
      for (const ref of pass.gen) {
        const cam = ref.source === "target" && ref.index !== null
          ? state.trajectory.frames.filter((f) => f.role === "target")[ref.index]
          : ref.index !== null ? anchorCamera(plan, ref.index) : null;
        if (!cam) continue;
        const to = cameraPosition(cam);
        const [x0, y0] = proj.toCanvas(from.x, from.y);
        const [x1, y1] = proj.toCanvas(to.x, to.y);
        ctx.beginPath();
        ctx.moveTo(x0, y0);
        ctx.lineTo(x1, y1);
        ctx.stroke();
      }
    }
    ctx.setLineDash([]);
    void producers;
  }

  let targetIndex = 0;
  frames.forEach((frame, i) => {
    const selected = state.selection?.kind === "frame" && state.selection.index === i;
    if (frame.role === "input") {
      drawFrustum(ctx, proj, frame, selected ? "#111" : "#555", false);
    } else {
      const pass = passMap.get(targetIndex);
      const color = pass === undefined ? "#bbb" : passColor(pass, passCount);
      drawFrustum(ctx, proj, frame, selected ? "#111" : color,
        anchors.has(targetIndex));
      targetIndex += 1;
    }
  });
}
