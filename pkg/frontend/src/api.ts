/** Thin typed client for the nvis HTTP API. No computation, no reshaping:
 * every method returns the service document as parsed. The fetch function is
 * injectable so tests can replay recorded exchanges. */

import type {
  AttackSpecDoc,
  CompareDoc,
  ErrorDoc,
  FreezeDoc,
  InputDetail,
  InputEntry,
  ModelEntry,
  SaliencyDoc,
  TraceDoc,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  kind: string;
  status: number;

  constructor(status: number, kind: string, detail: string) {
    super(detail);
    this.kind = kind;
    this.status = status;
  }
}

export class ApiClient {
  constructor(
    private base: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  renderUrl(renderId: string): string {
    return `${this.base}/renders/${renderId}`;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(`${this.base}${path}`, init);
    const text = await response.text();
    let doc: unknown;
    try {
      doc = JSON.parse(text);
    } catch {
      throw new ApiError(response.status, "protocol", `non-JSON response from ${path}`);
    }
    if (!response.ok) {
      const err = doc as ErrorDoc;
      throw new ApiError(response.status, err.error?.kind ?? "error", err.error?.detail ?? text);
    }
    return doc as T;
  }

  uploadModel(manifestText: string, weightsBase64: string): Promise<ModelEntry> {
    return this.request("POST", "/models", { manifest: manifestText, weights_b64: weightsBase64 });
  }

  listModels(): Promise<{ models: ModelEntry[] }> {
    return this.request("GET", "/models");
  }

  getModel(modelId: string): Promise<ModelEntry> {
    return this.request("GET", `/models/${modelId}`);
  }

  listInputs(modelId: string): Promise<{ inputs: InputEntry[] }> {
    return this.request("GET", `/models/${modelId}/inputs`);
  }

  getInput(modelId: string, inputId: string): Promise<InputDetail> {
    return this.request("GET", `/models/${modelId}/inputs/${inputId}`);
  }

  uploadImageInput(modelId: string, imageBase64: string): Promise<InputEntry> {
    return this.request("POST", `/models/${modelId}/inputs`, { image_b64: imageBase64 });
  }

  uploadTensorInput(modelId: string, shape: number[], values: number[]): Promise<InputEntry> {
    return this.request("POST", `/models/${modelId}/inputs`, { tensor: { shape, values } });
  }

  sketch(modelId: string, pixels: number[]): Promise<InputEntry> {
    return this.request("POST", `/models/${modelId}/sketch`, { pixels });
  }

  trace(modelId: string, inputId: string, freeze: FreezeDoc): Promise<TraceDoc> {
    return this.request("POST", `/models/${modelId}/trace`, { input_id: inputId, freeze });
  }

  compare(
    modelId: string,
    inputA: string,
    inputB: string,
    layerIndex: number,
    freeze: FreezeDoc,
  ): Promise<CompareDoc> {
    return this.request("POST", `/models/${modelId}/compare`, {
      input_a: inputA,
      input_b: inputB,
      layer_index: layerIndex,
      freeze,
    });
  }

  attack(modelId: string, inputId: string, spec: AttackSpecDoc): Promise<InputEntry> {
    return this.request("POST", `/models/${modelId}/attack`, { input_id: inputId, spec });
  }

  saliency(modelId: string, inputId: string, label: number): Promise<SaliencyDoc> {
    return this.request("POST", `/models/${modelId}/saliency`, { input_id: inputId, label });
  }
}
