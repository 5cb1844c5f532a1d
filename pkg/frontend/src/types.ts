/** Service response documents, mirrored field-for-field from the HTTP API. */

export interface LayerSummary {
  index: number;
  kind: string;
  output_shape: number[];
  filter_count: number;
}

export interface ModelEntry {
  id: string;
  name: string;
  input_shape: number[];
  layers: LayerSummary[];
  created_at: string;
}

export interface InputEntry {
  id: string;
  source: "upload" | "sketch" | "attack";
  shape: number[];
  parent_input_id: string | null;
  attack_spec: AttackSpecDoc | null;
  render_ids?: string[];
}

export interface InputDetail extends InputEntry {
  pixels: { shape: number[]; values: number[] };
}

export interface FreezeDoc {
  freezes: { layer: number; filters: number[] }[];
}

export interface AttackSpecDoc {
  algorithm: "fgsm" | "bim";
  epsilon: number;
  true_label: number;
  steps?: number;
  step_size?: number;
}

export interface TraceLayerDoc {
  index: number;
  kind: string;
  output_shape: number[];
  filter_count: number;
  frozen_filters: number[];
  render_ids: string[];
}

export interface TraceDoc {
  model_id: string;
  input_id: string;
  freeze: FreezeDoc;
  predicted_class: number;
  final_probs: number[];
  layers: TraceLayerDoc[];
}

export interface ChannelDiffDoc {
  channel: number;
  l2: number;
  cosine: number;
  max_abs: number;
  render_a: string;
  render_b: string;
  render_diff: string;
}

export interface CompareDoc {
  layer_index: number;
  per_channel: ChannelDiffDoc[];
  aggregate_l2: number;
  aggregate_cosine: number;
  heatmap: { shape: number[]; values: number[] };
}

export interface SaliencyDoc {
  label: number;
  values: { shape: number[]; values: number[] };
  render_id: string;
}

export interface ErrorDoc {
  error: { kind: string; detail: string };
}
