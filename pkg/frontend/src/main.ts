/** DOM wiring: sliders, orbit drag on the preview image, export/import. */

import { fetchMeta, makeRenderFn, type Meta } from "./api.js";
import { RenderScheduler, type DisplayedFrame } from "./scheduler.js";
import {
  type ControlState,
  exportSnapshot,
  importSnapshot,
  initialState,
  orbitDrag,
  renderBody,
  setLayer,
  setSlider,
  snapshotFilename,
  type Snapshot,
} from "./state.js";

const baseUrl = (window as { CONFIELD_API?: string }).CONFIELD_API ?? "";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  parent?: HTMLElement,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  parent?.appendChild(node);
  return node;
}

async function boot(root: HTMLElement): Promise<void> {
  root.textContent = "";
  let meta: Meta;
  try {
    meta = await fetchMeta(baseUrl);
  } catch (error) {
    const banner = el("div", { class: "error-banner" }, root);
    banner.textContent = `Could not reach the render service: ${String(error)}`;
    const retry = el("button", {}, banner);
    retry.textContent = "Retry";
    retry.onclick = () => void boot(root);
    return;
  }

  let state: ControlState = initialState(meta);
  const readOnly = meta.num_attributes === 0;

  const viewer = el("div", { class: "viewer" }, root);
  const img = el("img", { alt: "rendered frame", draggable: "false" }, viewer);
  const status = el("div", { class: "status" }, root);
  const panel = el("div", { class: "panel" }, root);

  let lastFrame: DisplayedFrame | null = null;
  const scheduler = new RenderScheduler(
    makeRenderFn(baseUrl),
    (frame) => {
      lastFrame = frame;
      const blob = new Blob([frame.bytes as BlobPart], { type: "image/png" });
      img.src = URL.createObjectURL(blob);
      status.textContent = frame.clamped ? "values clamped by server" : "";
    },
    (busy) => {
      status.textContent = busy ? "server busy, retrying…" : "";
    },
  );

  const push = (dragging: boolean) =>
    scheduler.control(renderBody(state, false), renderBody(state, true), dragging);

  if (readOnly) {
    status.textContent = "no controllable attributes: viewer mode";
  }
  meta.attribute_names.forEach((name, index) => {
    const row = el("label", { class: "slider-row" }, panel);
    el("span", {}, row).textContent = name;
    const slider = el("input", {
      type: "range", min: "-1", max: "1", step: "0.01", value: "0",
    }, row);
    const number = el("input", {
      type: "number", min: "-1", max: "1", step: "0.01", value: "0",
    }, row);
    const apply = (raw: string, dragging: boolean) => {
      state = setSlider(state, index, Number(raw));
      const v = String(state.sliders[index]);
      slider.value = v;
      number.value = v;
      push(dragging);
    };
    slider.oninput = () => apply(slider.value, true);
    slider.onchange = () => apply(slider.value, false);
    number.onchange = () => apply(number.value, false);
  });

  // orbit by dragging on the image
  let dragFrom: [number, number] | null = null;
  img.onpointerdown = (event) => {
    dragFrom = [event.clientX, event.clientY];
    img.setPointerCapture(event.pointerId);
  };
  img.onpointermove = (event) => {
    if (!dragFrom) return;
    state = orbitDrag(state, event.clientX - dragFrom[0], event.clientY - dragFrom[1]);
    dragFrom = [event.clientX, event.clientY];
    push(true);
  };
  img.onpointerup = () => {
    dragFrom = null;
    push(false);
  };

  const layerSelect = el("select", {}, panel);
  for (const layer of ["color", "mask", "depth"]) {
    const option = el("option", { value: layer }, layerSelect);
    option.textContent = layer;
  }
  layerSelect.onchange = () => {
    state = setLayer(state, layerSelect.value as ControlState["layer"]);
    push(false);
  };

  const download = (blob: Blob, filename: string) => {
    const link = el("a", { href: URL.createObjectURL(blob), download: filename });
    link.click();
  };

  const exportBtn = el("button", {}, panel);
  exportBtn.textContent = "Export snapshot";
  exportBtn.onclick = () => {
    const now = new Date();
    if (lastFrame) {
      download(new Blob([lastFrame.bytes as BlobPart], { type: "image/png" }),
               snapshotFilename(now, "png"));
    }
    download(new Blob([JSON.stringify(exportSnapshot(state), null, 1)],
                      { type: "application/json" }),
             snapshotFilename(now, "json"));
  };

  const importInput = el("input", { type: "file", accept: ".json" }, panel);
  importInput.onchange = async () => {
    const file = importInput.files?.[0];
    if (!file) return;
    state = importSnapshot(state, JSON.parse(await file.text()) as Snapshot);
    meta.attribute_names.forEach((_, index) => {
      const row = panel.querySelectorAll<HTMLInputElement>(".slider-row input");
      row[index * 2].value = String(state.sliders[index]);
      row[index * 2 + 1].value = String(state.sliders[index]);
    });
    push(false);
  };

  push(false); // initial frame
}

const root = document.getElementById("app");
if (root) {
  void boot(root);
}
