/** Typed client for the render service HTTP API. */

export interface CameraDefaults {
  azimuth: number;
  elevation: number;
  radius: number;
  focal_per_pixel: number;
  near: number;
  far: number;
}

export interface Meta {
  num_attributes: number;
  num_regions: number;
  attribute_names: string[];
  image_size: [number, number];
  camera_defaults: CameraDefaults;
  max_dim: number;
}

export interface RenderBody {
  attributes: number[];
  camera: { azimuth: number; elevation: number; radius: number };
  width: number;
  height: number;
  layer: "color" | "mask" | "depth";
  preview?: boolean;
  samples?: number;
  seed?: number;
}

export interface RenderResult {
  bytes: Uint8Array;
  clamped: boolean;
}

export class BusyError extends Error {
  constructor() {
    super("render queue full");
  }
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export type RenderFn = (body: RenderBody) => Promise<RenderResult>;

export async function fetchMeta(baseUrl: string): Promise<Meta> {
  const response = await fetch(`${baseUrl}/meta`);
  if (!response.ok) {
    throw new ApiError(response.status, `meta failed: ${response.status}`);
  }
  return (await response.json()) as Meta;
}

export function makeRenderFn(baseUrl: string): RenderFn {
  return async (body: RenderBody) => {
    const response = await fetch(`${baseUrl}/render`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (response.status === 429) {
      throw new BusyError();
    }
    if (!response.ok) {
      throw new ApiError(response.status, `render failed: ${response.status}`);
    }
    const buffer = await response.arrayBuffer();
    return {
      bytes: new Uint8Array(buffer),
      clamped: response.headers.get("Clamped") === "true",
    };
  };
}
