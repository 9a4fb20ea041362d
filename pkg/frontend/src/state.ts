/** Control-panel state: slider values, orbit camera, export snapshots.
 *
 * All mutations clamp, so a request built from any state is in range by
 * construction.
 */

import type { Meta, RenderBody } from "./api.js";

export interface ControlState {
  sliders: number[];
  azimuth: number;
  elevation: number;
  radius: number;
  layer: "color" | "mask" | "depth";
  width: number;
  height: number;
}

export const clampControl = (v: number): number => Math.max(-1, Math.min(1, v));

export function initialState(meta: Meta): ControlState {
  const [width, height] = meta.image_size;
  return {
    sliders: new Array(meta.num_attributes).fill(0),
    azimuth: meta.camera_defaults.azimuth,
    elevation: meta.camera_defaults.elevation,
    radius: meta.camera_defaults.radius,
    layer: "color",
    width,
    height,
  };
}

export function setSlider(state: ControlState, index: number, value: number): ControlState {
  if (index < 0 || index >= state.sliders.length || !Number.isFinite(value)) {
    return state;
  }
  const sliders = state.sliders.slice();
  sliders[index] = clampControl(value);
  return { ...state, sliders };
}

const ELEVATION_LIMIT = 1.45; // stay clear of the orbit singularity at the poles

export function orbitDrag(state: ControlState, dxPixels: number, dyPixels: number): ControlState {
  const azimuth = state.azimuth + dxPixels * 0.01;
  const elevation = Math.max(
    -ELEVATION_LIMIT,
    Math.min(ELEVATION_LIMIT, state.elevation + dyPixels * 0.01),
  );
  return { ...state, azimuth, elevation };
}

export function setLayer(state: ControlState, layer: ControlState["layer"]): ControlState {
  return { ...state, layer };
}

export function renderBody(state: ControlState, preview: boolean): RenderBody {
  return {
    attributes: state.sliders.map(clampControl),
    camera: {
      azimuth: state.azimuth,
      elevation: state.elevation,
      radius: state.radius,
    },
    width: state.width,
    height: state.height,
    layer: state.layer,
    preview,
    seed: 0,
  };
}

export interface Snapshot {
  sliders: number[];
  azimuth: number;
  elevation: number;
  radius: number;
  layer: ControlState["layer"];
}

export function exportSnapshot(state: ControlState): Snapshot {
  return {
    sliders: state.sliders.slice(),
    azimuth: state.azimuth,
    elevation: state.elevation,
    radius: state.radius,
    layer: state.layer,
  };
}

export function importSnapshot(state: ControlState, snapshot: Snapshot): ControlState {
  const sliders = state.sliders.map((v, i) =>
    i < snapshot.sliders.length ? clampControl(snapshot.sliders[i]) : v,
  );
  return {
    ...state,
    sliders,
    azimuth: snapshot.azimuth,
    elevation: snapshot.elevation,
    radius: snapshot.radius,
    layer: snapshot.layer ?? state.layer,
  };
}

export function snapshotFilename(now: Date, extension: string): string {
  const stamp = now.toISOString().replace(/[:.]/g, "-");
  return `confield-snapshot-${stamp}.${extension}`;
}
