/** Application wiring: operation panel on the left, detailed layer stack in
 * the middle, comparison panel at the bottom. The service owns every number;
 * this file only moves documents around and re-renders. */

import { ApiClient, ApiError } from "./api.js";
import {
  clear,
  renderCompare,
  renderInputList,
  renderLayerPicker,
  renderLayerStack,
  renderModelList,
  type Handlers,
} from "./panels.js";
import { Rasterizer } from "./raster.js";
import { SessionState } from "./state.js";
import type { AttackSpecDoc, ModelEntry, TraceDoc } from "./types.js";
import {
  compareToView,
  inputsToCards,
  modelToStack,
  saliencyToView,
  traceToStack,
} from "./viewmodel.js";

const api = new ApiClient("");
const state = new SessionState();
const expandedLayers = new Set<number>();

let currentModel: ModelEntry | null = null;
let currentTrace: TraceDoc | null = null;

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function setStatus(text: string, isError = false): void {
  const bar = byId<HTMLElement>("status");
  bar.textContent = text;
  bar.classList.toggle("error", isError);
}

function reportError(err: unknown): void {
  if (err instanceof ApiError) setStatus(`${err.kind}: ${err.message}`, true);
  else setStatus(String(err), true);
}

const handlers: Handlers = {
  onSelectModel(id) {
    state.selectModel(id);
    expandedLayers.clear();
    currentTrace = null;
    void loadModel(id);
  },
  onSelectInput(id) {
    state.selection.inputId = id;
    void refreshTrace();
  },
  onPickCompare(slot, id) {
    if (slot === "a") state.selection.compareA = id;
    else state.selection.compareB = id;
    void refreshCompare();
  },
  onToggleFreeze(layer, filter) {
    state.freeze.toggle(layer, filter);
    setStatus(`${state.freeze.count()} filters frozen`);
    void refreshTrace();
    void refreshCompare();
  },
  onSelectCompareLayer(layer) {
    state.selection.compareLayer = layer;
    void refreshCompare();
  },
};

async function refreshModels(): Promise<void> {
  try {
    const { models } = await api.listModels();
    renderModelList(byId("model-list"), models, state.selection.modelId, handlers);
  } catch (err) {
    reportError(err);
  }
}

async function loadModel(modelId: string): Promise<void> {
  try {
    currentModel = await api.getModel(modelId);
    renderModelList(byId("model-list"), (await api.listModels()).models, modelId, handlers);
    renderLayerStack(
      byId("layer-stack"),
      { layers: modelToStack(currentModel) },
      expandedLayers,
      (id) => api.renderUrl(id),
      handlers,
    );
    renderLayerPicker(
      byId<HTMLSelectElement>("compare-layer"),
      modelToStack(currentModel),
      state.selection.compareLayer,
    );
    setupSketchpad(currentModel);
    setStatus(`model ${currentModel.name} selected`);
    await refreshInputs();
  } catch (err) {
    reportError(err);
  }
}

async function refreshInputs(): Promise<void> {
  const modelId = state.selection.modelId;
  if (!modelId) return;
  const ticket = state.gates.inputs.begin();
  try {
    const { inputs } = await api.listInputs(modelId);
    if (!state.gates.inputs.accept(ticket)) return;
    renderInputList(
      byId("input-list"),
      inputsToCards(inputs),
      state.selection.inputId,
      (id) => api.renderUrl(id),
      handlers,
    );
  } catch (err) {
    reportError(err);
  }
}

async function refreshTrace(): Promise<void> {
  const { modelId, inputId } = state.selection;
  if (!modelId || !inputId) return;
  const ticket = state.gates.trace.begin();
  try {
    const trace = await api.trace(modelId, inputId, state.freeze.toDoc());
    if (!state.gates.trace.accept(ticket)) return;
    currentTrace = trace;
    renderLayerStack(
      byId("layer-stack"),
      traceToStack(trace),
      expandedLayers,
      (id) => api.renderUrl(id),
      handlers,
    );
  } catch (err) {
    reportError(err);
  }
}

async function refreshCompare(): Promise<void> {
  const { modelId, compareA, compareB, compareLayer } = state.selection;
  if (!modelId || !compareA || !compareB || compareLayer === null) return;
  const ticket = state.gates.compare.begin();
  try {
    const doc = await api.compare(modelId, compareA, compareB, compareLayer, state.freeze.toDoc());
    if (!state.gates.compare.accept(ticket)) return;
    renderCompare(byId("compare-body"), compareToView(doc), (id) => api.renderUrl(id));
  } catch (err) {
    reportError(err);
  }
}

async function runSaliency(): Promise<void> {
  const { modelId, inputId } = state.selection;
  const label = Number(byId<HTMLInputElement>("saliency-label").value);
  if (!modelId || !inputId || Number.isNaN(label)) return;
  const ticket = state.gates.saliency.begin();
  try {
    const doc = await api.saliency(modelId, inputId, label);
    if (!state.gates.saliency.accept(ticket)) return;
    const view = saliencyToView(doc);
    const overlay = byId<HTMLImageElement>("saliency-overlay");
    overlay.src = api.renderUrl(view.renderId);
    overlay.classList.remove("hidden");
    setStatus(`saliency for label ${view.label} (${view.shapeLabel})`);
  } catch (err) {
    reportError(err);
  }
}

/* ---------------- operation panel ---------------- */

function wireModelUpload(): void {
  byId<HTMLButtonElement>("upload-model").addEventListener("click", async () => {
    const manifestFile = byId<HTMLInputElement>("model-json").files?.[0];
    const weightsFile = byId<HTMLInputElement>("model-bin").files?.[0];
    if (!manifestFile || !weightsFile) {
      setStatus("choose both model.json and weights.bin", true);
      return;
    }
    try {
      const manifestText = await manifestFile.text();
      const weights = new Uint8Array(await weightsFile.arrayBuffer());
      let binary = "";
      for (const byte of weights) binary += String.fromCharCode(byte);
      const entry = await api.uploadModel(manifestText, btoa(binary));
      setStatus(`uploaded ${entry.name}`);
      await refreshModels();
    } catch (err) {
      reportError(err);
    }
  });
}

function wireInputUpload(): void {
  byId<HTMLButtonElement>("upload-input").addEventListener("click", async () => {
    const modelId = state.selection.modelId;
    const file = byId<HTMLInputElement>("input-file").files?.[0];
    if (!modelId || !file) {
      setStatus("select a model and choose an image", true);
      return;
    }
    try {
      const bytes = new Uint8Array(await file.arrayBuffer());
      let binary = "";
      for (const byte of bytes) binary += String.fromCharCode(byte);
      await api.uploadImageInput(modelId, btoa(binary));
      await refreshInputs();
      setStatus("input uploaded");
    } catch (err) {
      reportError(err);
    }
  });
}

function wireAttackForm(): void {
  byId<HTMLButtonElement>("run-attack").addEventListener("click", async () => {
    const { modelId, inputId } = state.selection;
    if (!modelId || !inputId) {
      setStatus("select a model and an input first", true);
      return;
    }
    const algorithm = byId<HTMLSelectElement>("attack-alg").value as "fgsm" | "bim";
    const spec: AttackSpecDoc = {
      algorithm,
      epsilon: Number(byId<HTMLInputElement>("attack-eps").value),
      true_label: Number(byId<HTMLInputElement>("attack-label").value),
    };
    if (algorithm === "bim") {
      spec.steps = Number(byId<HTMLInputElement>("attack-steps").value);
      spec.step_size = Number(byId<HTMLInputElement>("attack-step-size").value);
    }
    try {
      const entry = await api.attack(modelId, inputId, spec);
      setStatus(`adversarial sample added (${entry.id.slice(0, 8)})`);
      await refreshInputs();
    } catch (err) {
      reportError(err);
    }
  });
}

/* ---------------- sketchpad ---------------- */

let raster: Rasterizer | null = null;

function setupSketchpad(model: ModelEntry): void {
  const canvas = byId<HTMLCanvasElement>("sketchpad");
  const [channels, height, width] = model.input_shape;
  const single = channels === 1;
  canvas.classList.toggle("disabled", !single);
  byId<HTMLButtonElement>("sketch-submit").disabled = !single;
  if (!single) {
    setStatus("sketchpad needs a single-channel model");
    return;
  }
  raster = new Rasterizer(width, height);
  paintSketch(canvas);
}

function paintSketch(canvas: HTMLCanvasElement): void {
  if (!raster) return;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const sx = canvas.width / raster.width;
  const sy = canvas.height / raster.height;
  ctx.fillStyle = "#000";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#fff";
  for (let y = 0; y < raster.height; y++) {
    for (let x = 0; x < raster.width; x++) {
      const v = raster.at(x, y);
      if (v > 0) {
        ctx.globalAlpha = v;
        ctx.fillRect(x * sx, y * sy, sx, sy);
        ctx.globalAlpha = 1;
      }
    }
  }
}

function wireSketchpad(): void {
  const canvas = byId<HTMLCanvasElement>("sketchpad");
  let drawing = false;
  let last: [number, number] | null = null;

  const gridPoint = (event: PointerEvent): [number, number] => {
    const rect = canvas.getBoundingClientRect();
    if (!raster) return [0, 0];
    return [
      ((event.clientX - rect.left) / rect.width) * raster.width,
      ((event.clientY - rect.top) / rect.height) * raster.height,
    ];
  };

  const brushValue = () => (byId<HTMLInputElement>("sketch-erase").checked ? 0 : 1);

  canvas.addEventListener("pointerdown", (event) => {
    if (!raster) return;
    drawing = true;
    canvas.setPointerCapture(event.pointerId);
    const [x, y] = gridPoint(event);
    raster.stamp(x, y, 1.2, brushValue());
    last = [x, y];
    paintSketch(canvas);
  });
  canvas.addEventListener("pointermove", (event) => {
    if (!drawing || !raster || !last) return;
    const [x, y] = gridPoint(event);
    raster.stroke(last[0], last[1], x, y, 1.2, brushValue());
    last = [x, y];
    paintSketch(canvas);
  });
  const stop = () => {
    drawing = false;
    last = null;
  };
  canvas.addEventListener("pointerup", stop);
  canvas.addEventListener("pointerleave", stop);

  byId<HTMLButtonElement>("sketch-clear").addEventListener("click", () => {
    raster?.clear();
    paintSketch(canvas);
  });
  byId<HTMLButtonElement>("sketch-submit").addEventListener("click", async () => {
    const modelId = state.selection.modelId;
    if (!modelId || !raster) return;
    try {
      const entry = await api.sketch(modelId, raster.toPixels());
      state.selection.inputId = entry.id;
      await refreshInputs();
      await refreshTrace();
      setStatus(`sketch stored (${entry.id.slice(0, 8)})`);
    } catch (err) {
      reportError(err);
    }
  });
}

/* ---------------- boot ---------------- */

function wireCompareControls(): void {
  byId<HTMLSelectElement>("compare-layer").addEventListener("change", (event) => {
    const value = (event.target as HTMLSelectElement).value;
    if (value !== "") handlers.onSelectCompareLayer(Number(value));
  });
  byId<HTMLButtonElement>("compare-expand").addEventListener("click", () => {
    byId("compare-panel").classList.toggle("fullsize");
  });
  byId<HTMLButtonElement>("run-saliency").addEventListener("click", () => void runSaliency());
}

export function boot(): void {
  wireModelUpload();
  wireInputUpload();
  wireAttackForm();
  wireSketchpad();
  wireCompareControls();
  clear(byId("layer-stack"));
  void refreshModels();
  setStatus("ready");
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}

export { currentModel, currentTrace, state };
