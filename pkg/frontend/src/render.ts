// Canvas drawing for the three 400x400 panels: image + overlay, rendered
// skeleton, and the magnified crop. Pure geometry helpers are exported so
// they can be tested without a DOM.

import type { SessionState } from "./api.js";
import { PANEL_SIZE, PARENTS, cropRect, nativeToCanvas } from "./state.js";
import type { ViewState } from "./state.js";

const BONE_COLOR = "#4da3ff";
const MARKER_COLOR = "#ff5050";
const SELECTED_COLOR = "#ffd23c";

/**
 * Line width for a bone whose midpoint depth is `z`, thicker when closer.
 * Depths are normalized against the pose's own [zMin, zMax] span.
 */
export function depthWidth(z: number, zMin: number, zMax: number): number {
  if (!(zMax > zMin)) return 3;
  const near = 1 - (z - zMin) / (zMax - zMin); // 1 = closest joint
  return 1.5 + 3.5 * near;
}

/**
 * Orthographic placement of root-relative 3D keypoints into a 400x400
 * panel: x/y scaled so the pose fills ~80% of the panel.
 */
export function skeletonLayout(points: [number, number, number][]): { x: number; y: number }[] {
  const root = points[0]!;
  const rel = points.map((p) => [p[0] - root[0], p[1] - root[1], p[2] - root[2]]);
  const extent = Math.max(...rel.map((p) => Math.max(Math.abs(p[0]!), Math.abs(p[1]!))), 1e-6);
  const scale = (0.4 * PANEL_SIZE) / extent;
  return rel.map((p) => ({
    x: PANEL_SIZE / 2 + p[0]! * scale,
    y: PANEL_SIZE / 2 + p[1]! * scale,
  }));
}

function drawMarker(
  ctx: CanvasRenderingContext2D,
  x: number,
  y: number,
  color: string,
  radius = 4,
): void {
  ctx.beginPath();
  ctx.arc(x, y, radius, 0, 2 * Math.PI);
  ctx.fillStyle = color;
  ctx.fill();
}

function drawBones(
  ctx: CanvasRenderingContext2D,
  pts: { x: number; y: number }[],
  widths: number[],
): void {
  ctx.strokeStyle = BONE_COLOR;
  for (let j = 1; j < PARENTS.length; j++) {
    const parent = PARENTS[j]!;
    ctx.beginPath();
    ctx.lineWidth = widths[j]!;
    ctx.moveTo(pts[parent]!.x, pts[parent]!.y);
    ctx.lineTo(pts[j]!.x, pts[j]!.y);
    ctx.stroke();
  }
}

function boneWidths(state: SessionState): number[] {
  const zs = state.keypoints_3d.map((p) => p[2]);
  const zMin = Math.min(...zs);
  const zMax = Math.max(...zs);
  return state.keypoints_3d.map((p, j) => {
    const parent = PARENTS[j]!;
    const mid = parent >= 0 ? (p[2] + state.keypoints_3d[parent]![2]) / 2 : p[2];
    return depthWidth(mid, zMin, zMax);
  });
}

function clear(ctx: CanvasRenderingContext2D): void {
  ctx.fillStyle = "#181818";
  ctx.fillRect(0, 0, PANEL_SIZE, PANEL_SIZE);
}

/** Left panel: input image with annotations and the projected skeleton. */
export function drawImagePanel(
  ctx: CanvasRenderingContext2D,
  view: ViewState,
  image: HTMLImageElement | null,
): void {
  clear(ctx);
  const state = view.server;
  if (!state) return;
  if (image && image.complete && image.naturalWidth > 0) {
    ctx.drawImage(image, 0, 0, PANEL_SIZE, PANEL_SIZE);
  }
  if (!view.overlayOn) return;
  const cam = state.camera;
  if (state.projected) {
    const pts = state.projected.map(([u, v]) => nativeToCanvas(u, v, cam));
    drawBones(ctx, pts, boneWidths(state));
  }
  for (const [key, [u, v]] of Object.entries(state.annotated)) {
    const { x, y } = nativeToCanvas(u, v, cam);
    const joint = Number(key);
    drawMarker(ctx, x, y, joint === view.selectedJoint ? SELECTED_COLOR : MARKER_COLOR);
  }
}

/** Center panel: the fitted skeleton alone, depth-cued line thickness. */
export function drawSkeletonPanel(ctx: CanvasRenderingContext2D, view: ViewState): void {
  clear(ctx);
  const state = view.server;
  if (!state) return;
  const pts = skeletonLayout(state.keypoints_3d);
  drawBones(ctx, pts, boneWidths(state));
  for (const p of pts) drawMarker(ctx, p.x, p.y, MARKER_COLOR, 3);
}

/** Right panel: magnified crop around the crop center. */
export function drawCropPanel(
  ctx: CanvasRenderingContext2D,
  view: ViewState,
  image: HTMLImageElement | null,
): void {
  clear(ctx);
  const state = view.server;
  if (!state) return;
  const cam = state.camera;
  const rect = cropRect(view.cropCenter, view.cropSize, cam);
  const zoom = PANEL_SIZE / rect.size;
  if (image && image.complete && image.naturalWidth > 0) {
    ctx.drawImage(image, rect.u, rect.v, rect.size, rect.size, 0, 0, PANEL_SIZE, PANEL_SIZE);
  }
  if (!view.overlayOn) return;
  const toCrop = (u: number, v: number) => ({
    x: (u - rect.u) * zoom,
    y: (v - rect.v) * zoom,
  });
  if (state.projected) {
    const pts = state.projected.map(([u, v]) => toCrop(u, v));
    drawBones(ctx, pts, boneWidths(state));
  }
  for (const [key, [u, v]] of Object.entries(state.annotated)) {
    const { x, y } = toCrop(u, v);
    const joint = Number(key);
    drawMarker(ctx, x, y, joint === view.selectedJoint ? SELECTED_COLOR : MARKER_COLOR, 6);
  }
}
