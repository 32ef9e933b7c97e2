// DOM wiring: sliders, action buttons, and canvas clicks, all funnelled
// through the API client. The server response after every mutation replaces
// the local copy of session state — the UI never edits it directly.

import { AnnotationClient, ApiError } from "./api.js";
import type { SessionState } from "./api.js";
import {
  JOINT_NAMES,
  NUM_JOINTS,
  canvasToNative,
  debounce,
  sliderSpecs,
} from "./state.js";
import type { ViewState } from "./state.js";

const DEBOUNCE_MS = 50;
const ROTATION_RANGE = Math.PI;
const TRANSLATION_RANGE = 0.3;
const DEPTH_RANGE: [number, number] = [0.25, 1.5];

export interface ControlDeps {
  client: AnnotationClient;
  view: ViewState;
  onState: (state: SessionState) => void;
  onError: (message: string) => void;
}

function sliderRow(
  label: string,
  min: number,
  max: number,
  value: number,
  onInput: (value: number) => void,
): HTMLLabelElement {
  const row = document.createElement("label");
  row.className = "slider-row";
  const text = document.createElement("span");
  text.textContent = label;
  const input = document.createElement("input");
  input.type = "range";
  input.min = String(min);
  input.max = String(max);
  input.step = String((max - min) / 200);
  input.value = String(value);
  input.addEventListener("input", () => onInput(Number(input.value)));
  row.append(text, input);
  return row;
}

function button(label: string, onClick: () => void): HTMLButtonElement {
  const el = document.createElement("button");
  el.textContent = label;
  el.addEventListener("click", onClick);
  return el;
}

export class Controls {
  private root: HTMLElement;
  private deps: ControlDeps;
  private pendingArticulation: Record<string, number> = {};
  private pendingRotation: number[] | null = null;
  private pendingTranslation: number[] | null = null;
  private flush: () => void;

  constructor(root: HTMLElement, deps: ControlDeps) {
    this.root = root;
    this.deps = deps;
    this.flush = debounce(() => void this.sendParams(), DEBOUNCE_MS);
  }

  /** Apply a server response and refresh the disabled state of inputs. */
  private accept(state: SessionState): void {
    this.deps.view.server = state;
    this.deps.onState(state);
  }

  private async mutate(op: () => Promise<SessionState>): Promise<void> {
    try {
      this.accept(await op());
    } catch (err) {
      if (err instanceof ApiError && err.code === "busy") {
        this.deps.onError("a fit is still running");
      } else {
        this.deps.onError(err instanceof Error ? err.message : String(err));
      }
    }
  }

  private async sendParams(): Promise<void> {
    const body: Record<string, unknown> = {};
    if (Object.keys(this.pendingArticulation).length > 0) {
      body.articulation = this.pendingArticulation;
    }
    if (this.pendingRotation) body.rotation = this.pendingRotation;
    if (this.pendingTranslation) body.translation = this.pendingTranslation;
    this.pendingArticulation = {};
    this.pendingRotation = null;
    this.pendingTranslation = null;
    if (Object.keys(body).length === 0) return;
    await this.mutate(() => this.deps.client.putParams(this.deps.view.sessionId, body));
  }

  /** Block all inputs while a fit round-trip is in flight. */
  private setBusy(busy: boolean): void {
    this.deps.view.busy = busy;
    for (const el of this.root.querySelectorAll("input, button, select")) {
      (el as HTMLInputElement).disabled = busy;
    }
  }

  async runFit(mode: "supervised" | "unsupervised"): Promise<void> {
    if (this.deps.view.busy) return;
    this.setBusy(true);
    try {
      await this.mutate(() => this.deps.client.fit(this.deps.view.sessionId, mode));
    } finally {
      this.setBusy(false);
      this.build();
    }
  }

  handleCanvasClick(x: number, y: number): void {
    const state = this.deps.view.server;
    if (!state || this.deps.view.busy) return;
    const { u, v } = canvasToNative(x, y, state.camera);
    this.deps.view.cropCenter = { u, v };
    void this.mutate(() =>
      this.deps.client.putKeypoint(this.deps.view.sessionId, this.deps.view.selectedJoint, u, v),
    );
  }

  /** Rebuild the control column from the current server state. */
  build(): void {
    const state = this.deps.view.server;
    this.root.replaceChildren();
    if (!state) return;

    const joint = document.createElement("select");
    for (let j = 0; j < NUM_JOINTS; j++) {
      const opt = document.createElement("option");
      opt.value = String(j);
      opt.textContent = `${j}: ${JOINT_NAMES[j]}`;
      joint.append(opt);
    }
    joint.value = String(this.deps.view.selectedJoint);
    joint.addEventListener("change", () => {
      this.deps.view.selectedJoint = Number(joint.value);
      this.deps.onState(state);
    });
    const jointRow = document.createElement("label");
    jointRow.className = "slider-row";
    const jointText = document.createElement("span");
    jointText.textContent = "annotate joint";
    jointRow.append(jointText, joint);
    this.root.append(jointRow);

    this.root.append(
      button(state ? "overlay on/off" : "overlay", () => {
        this.deps.view.overlayOn = !this.deps.view.overlayOn;
        this.deps.onState(state);
      }),
      button("clear joint", () =>
        void this.mutate(() =>
          this.deps.client.deleteKeypoint(
            this.deps.view.sessionId,
            this.deps.view.selectedJoint,
          ),
        ),
      ),
      button("fit", () => void this.runFit("supervised")),
      button("lift 3D", () => void this.runFit("unsupervised")),
      button("reset", () =>
        void this.mutate(() => this.deps.client.reset(this.deps.view.sessionId)).then(() =>
          this.build(),
        ),
      ),
      button("save accepted", () =>
        void this.mutate(() => this.deps.client.save(this.deps.view.sessionId, "accepted")),
      ),
      button("save rejected", () =>
        void this.mutate(() => this.deps.client.save(this.deps.view.sessionId, "rejected")),
      ),
    );

    const global = document.createElement("div");
    global.className = "slider-group";
    const rotLabels = ["rotation x", "rotation y", "rotation z"];
    for (let k = 0; k < 3; k++) {
      global.append(
        sliderRow(rotLabels[k]!, -ROTATION_RANGE, ROTATION_RANGE, state.params.rotation[k]!, (v) => {
          const rot = this.pendingRotation ?? [...this.deps.view.server!.params.rotation];
          rot[k] = v;
          this.pendingRotation = rot;
          this.flush();
        }),
      );
    }
    const transLimits: [number, number][] = [
      [-TRANSLATION_RANGE, TRANSLATION_RANGE],
      [-TRANSLATION_RANGE, TRANSLATION_RANGE],
      DEPTH_RANGE,
    ];
    const transLabels = ["translate x (m)", "translate y (m)", "depth z (m)"];
    for (let k = 0; k < 3; k++) {
      const [lo, hi] = transLimits[k]!;
      global.append(
        sliderRow(transLabels[k]!, lo, hi, state.params.translation[k]!, (v) => {
          const t = this.pendingTranslation ?? [...this.deps.view.server!.params.translation];
          t[k] = v;
          this.pendingTranslation = t;
          this.flush();
        }),
      );
    }
    this.root.append(global);

    const fingers = document.createElement("div");
    fingers.className = "slider-group";
    for (const spec of sliderSpecs(state.limits)) {
      fingers.append(
        sliderRow(spec.label, spec.min, spec.max, state.params.articulation[spec.index]!, (v) => {
          this.pendingArticulation[String(spec.index)] = v;
          this.flush();
        }),
      );
    }
    this.root.append(fingers);
  }
}
