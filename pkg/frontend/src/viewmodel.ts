/** Pure mappers from service documents to display rows.
 *
 * Invariant: the UI computes nothing. Every number that reaches the screen is
 * carried through these mappers untouched from a service response, displayed
 * with String(value). The audit helpers below make that checkable: collect
 * the displayed values of a view and assert each one appears in the response
 * document it was built from. */

import type {
  ChannelDiffDoc,
  CompareDoc,
  InputEntry,
  LayerSummary,
  ModelEntry,
  SaliencyDoc,
  TraceDoc,
} from "./types.js";

export interface FilterTile {
  layer: number;
  filter: number;
  renderId: string;
  frozen: boolean;
}

export interface LayerRow {
  index: number;
  kind: string;
  shapeLabel: string;
  filterCount: number;
  frozenFilters: number[];
  tiles: FilterTile[];
}

export interface StackView {
  predictedClass: number;
  finalProbs: number[];
  layers: LayerRow[];
}

export function shapeLabel(shape: number[]): string {
  return shape.map(String).join("×");
}

/** Layer stack before any trace exists: structure only, no activations. */
export function modelToStack(model: ModelEntry): LayerRow[] {
  return model.layers.map((layer: LayerSummary) => ({
    index: layer.index,
    kind: layer.kind,
    shapeLabel: shapeLabel(layer.output_shape),
    filterCount: layer.filter_count,
    frozenFilters: [],
    tiles: [],
  }));
}

export function traceToStack(trace: TraceDoc): StackView {
  return {
    predictedClass: trace.predicted_class,
    finalProbs: trace.final_probs,
    layers: trace.layers.map((layer) => ({
      index: layer.index,
      kind: layer.kind,
      shapeLabel: shapeLabel(layer.output_shape),
      filterCount: layer.filter_count,
      frozenFilters: layer.frozen_filters,
      tiles: layer.render_ids.map((renderId, filter) => ({
        layer: layer.index,
        filter,
        renderId,
        frozen: layer.frozen_filters.includes(filter),
      })),
    })),
  };
}

export interface CompareRow {
  channel: number;
  l2: number;
  cosine: number;
  maxAbs: number;
  renderA: string;
  renderB: string;
  renderDiff: string;
}

export interface CompareView {
  layerIndex: number;
  aggregateL2: number;
  aggregateCosine: number;
  rows: CompareRow[];
}

/** Rows ordered the way the service ranks channels: L2 descending, ties to
 * the lower channel index. Sorting reorders rows; it never alters a value. */
export function compareToView(doc: CompareDoc): CompareView {
  const rows = doc.per_channel
    .map((c: ChannelDiffDoc) => ({
      channel: c.channel,
      l2: c.l2,
      cosine: c.cosine,
      maxAbs: c.max_abs,
      renderA: c.render_a,
      renderB: c.render_b,
      renderDiff: c.render_diff,
    }))
    .sort((a, b) => (b.l2 - a.l2) || (a.channel - b.channel));
  return {
    layerIndex: doc.layer_index,
    aggregateL2: doc.aggregate_l2,
    aggregateCosine: doc.aggregate_cosine,
    rows,
  };
}

export interface InputCard {
  id: string;
  source: string;
  shapeLabel: string;
  parentId: string | null;
  thumbRenderId: string | null;
  attackLabel: string | null;
}

export function inputsToCards(inputs: InputEntry[]): InputCard[] {
  return inputs.map((entry) => ({
    id: entry.id,
    source: entry.source,
    shapeLabel: shapeLabel(entry.shape),
    parentId: entry.parent_input_id,
    thumbRenderId: entry.render_ids?.[0] ?? null,
    attackLabel: entry.attack_spec
      ? `${entry.attack_spec.algorithm} ε=${String(entry.attack_spec.epsilon)}`
      : null,
  }));
}

export interface SaliencyView {
  label: number;
  renderId: string;
  values: number[];
  shapeLabel: string;
}

export function saliencyToView(doc: SaliencyDoc): SaliencyView {
  return {
    label: doc.label,
    renderId: doc.render_id,
    values: doc.values.values,
    shapeLabel: shapeLabel(doc.values.shape),
  };
}

/* ---------------- audit helpers ---------------- */

/** All numbers reachable in a JSON document. */
export function collectNumbers(doc: unknown, into: Set<number> = new Set()): Set<number> {
  if (typeof doc === "number") {
    into.add(doc);
  } else if (Array.isArray(doc)) {
    for (const item of doc) collectNumbers(item, into);
  } else if (doc !== null && typeof doc === "object") {
    for (const value of Object.values(doc)) collectNumbers(value, into);
  }
  return into;
}

/** Numbers a view would put on screen (render ids and labels excluded). */
export function displayedNumbers(view: StackView | CompareView | SaliencyView): number[] {
  const out: number[] = [];
  if ("layers" in view) {
    out.push(view.predictedClass, ...view.finalProbs);
    for (const layer of view.layers) {
      out.push(layer.index, layer.filterCount, ...layer.frozenFilters);
    }
  } else if ("rows" in view) {
    out.push(view.layerIndex, view.aggregateL2, view.aggregateCosine);
    for (const row of view.rows) {
      out.push(row.channel, row.l2, row.cosine, row.maxAbs);
    }
  } else {
    out.push(view.label, ...view.values);
  }
  return out;
}
