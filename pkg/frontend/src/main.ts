// Entry point: one annotation session per page. Loads the instance list,
// opens a session, and keeps the three panels in sync with server state.

import { AnnotationClient } from "./api.js";
import type { SessionState } from "./api.js";
import { Controls } from "./controls.js";
import { drawCropPanel, drawImagePanel, drawSkeletonPanel } from "./render.js";
import { PANEL_SIZE, initialViewState } from "./state.js";

const client = new AnnotationClient("");
const view = initialViewState();

function panel(id: string): CanvasRenderingContext2D {
  const canvas = document.getElementById(id) as HTMLCanvasElement;
  canvas.width = PANEL_SIZE;
  canvas.height = PANEL_SIZE;
  return canvas.getContext("2d")!;
}

let image: HTMLImageElement | null = null;

function redraw(): void {
  drawImagePanel(panel("panel-image"), view, image);
  drawSkeletonPanel(panel("panel-skeleton"), view);
  drawCropPanel(panel("panel-crop"), view, image);
  const statusEl = document.getElementById("status")!;
  const state = view.server;
  if (state) {
    const loss = state.loss ? `loss ${state.loss.total.toFixed(2)} px²` : "no fit yet";
    statusEl.textContent =
      `instance ${state.instance_index} (${state.side}, ${state.status}) — ` +
      `${Object.keys(state.annotated).length}/21 annotated — ${loss}`;
  }
}

function showError(message: string): void {
  const el = document.getElementById("error")!;
  el.textContent = message;
  setTimeout(() => {
    if (el.textContent === message) el.textContent = "";
  }, 4000);
}

async function openInstance(index: number, controls: Controls): Promise<void> {
  const state = await client.createSession(index);
  view.sessionId = state.id;
  view.server = state;
  view.cropCenter = { u: state.camera.image_width / 2, v: state.camera.image_height / 2 };
  image = null;
  if (state.image) {
    image = new Image();
    image.onload = redraw;
    image.src = state.image;
  }
  controls.build();
  redraw();
}

async function boot(): Promise<void> {
  const controls = new Controls(document.getElementById("controls")!, {
    client,
    view,
    onState: (_state: SessionState) => redraw(),
    onError: showError,
  });

  const page = await client.listInstances();
  if (page.total === 0) {
    showError("dataset is empty");
    return;
  }
  let current = 0;
  await openInstance(current, controls);

  document.getElementById("prev")!.addEventListener("click", () => {
    if (current > 0) void openInstance(--current, controls).catch((e) => showError(String(e)));
  });
  document.getElementById("next")!.addEventListener("click", () => {
    if (current < page.total - 1) {
      void openInstance(++current, controls).catch((e) => showError(String(e)));
    }
  });

  const imagePanel = document.getElementById("panel-image")!;
  imagePanel.addEventListener("click", (ev) => {
    const rect = imagePanel.getBoundingClientRect();
    controls.handleCanvasClick(ev.clientX - rect.left, ev.clientY - rect.top);
  });
}

boot().catch((err) => showError(err instanceof Error ? err.message : String(err)));
