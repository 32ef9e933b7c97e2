// View-side state and the pure helpers behind the controls: slider layout
// derived from the server's articulation limits, canvas/native coordinate
// mapping, and the magnifier crop. No DOM access here.

import type { Camera, SessionState } from "./api.js";

export const NUM_JOINTS = 21;
export const PANEL_SIZE = 400;
export const FINGERS = ["thumb", "index", "middle", "ring", "pinky"] as const;
export const FINGER_JOINTS = ["knuckle", "middle", "distal"] as const;
export const AXES = ["abduction", "twist", "flexion"] as const;

// Parent of each joint in the 21-joint tree (wrist = 0).
export const PARENTS = [
  -1, 0, 1, 2, 3, 0, 5, 6, 7, 0, 9, 10, 11, 0, 13, 14, 15, 0, 17, 18, 19,
];

export const JOINT_NAMES: string[] = ["wrist"];
for (const finger of FINGERS) {
  for (const part of ["base", "mid", "distal", "tip"]) {
    JOINT_NAMES.push(`${finger} ${part}`);
  }
}

/** Articulation-vector index of one axis of one finger joint. */
export function articulationIndex(finger: number, joint: number, axis: number): number {
  return 3 * (3 * finger + joint) + axis;
}

export interface SliderSpec {
  index: number; // articulation index 0..44
  label: string;
  min: number;
  max: number;
}

/**
 * One slider per live articulation entry. Locked axes (min == max in the
 * template limits) get no control at all, so e.g. middle and distal finger
 * joints expose only their flexion slider.
 */
export function sliderSpecs(limits: { min: number[]; max: number[] }): SliderSpec[] {
  const specs: SliderSpec[] = [];
  for (let finger = 0; finger < FINGERS.length; finger++) {
    for (let joint = 0; joint < FINGER_JOINTS.length; joint++) {
      for (let axis = 0; axis < AXES.length; axis++) {
        const index = articulationIndex(finger, joint, axis);
        const min = limits.min[index]!;
        const max = limits.max[index]!;
        if (min === max) continue;
        specs.push({
          index,
          label: `${FINGERS[finger]} ${FINGER_JOINTS[joint]} ${AXES[axis]}`,
          min,
          max,
        });
      }
    }
  }
  return specs;
}

export interface ViewState {
  sessionId: string;
  selectedJoint: number; // 0..20
  overlayOn: boolean;
  cropCenter: { u: number; v: number }; // native pixels
  cropSize: number; // native pixels per crop edge
  busy: boolean; // a fit is in flight; inputs disabled
  server: SessionState | null;
}

export function initialViewState(): ViewState {
  return {
    sessionId: "",
    selectedJoint: 0,
    overlayOn: true,
    cropCenter: { u: 0, v: 0 },
    cropSize: 100,
    busy: false,
    server: null,
  };
}

/** Map a click on the 400x400 panel to native image pixels. */
export function canvasToNative(x: number, y: number, cam: Camera): { u: number; v: number } {
  return {
    u: (x * cam.image_width) / PANEL_SIZE,
    v: (y * cam.image_height) / PANEL_SIZE,
  };
}

/** Map native image pixels to 400x400 panel coordinates. */
export function nativeToCanvas(u: number, v: number, cam: Camera): { x: number; y: number } {
  return {
    x: (u * PANEL_SIZE) / cam.image_width,
    y: (v * PANEL_SIZE) / cam.image_height,
  };
}

export interface CropRect {
  u: number;
  v: number;
  size: number;
}

/** Square crop around a center, clamped to stay inside the image. */
export function cropRect(
  center: { u: number; v: number },
  size: number,
  cam: Camera,
): CropRect {
  const side = Math.min(size, cam.image_width, cam.image_height);
  const u = Math.min(Math.max(center.u - side / 2, 0), cam.image_width - side);
  const v = Math.min(Math.max(center.v - side / 2, 0), cam.image_height - side);
  return { u, v, size: side };
}

/**
 * Trailing-edge debounce: during continuous calls at most one underlying
 * call is issued per `ms` window, with the latest arguments.
 */
export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  ms: number,
): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | null = null;
  return (...args: A) => {
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      fn(...args);
    }, ms);
  };
}
