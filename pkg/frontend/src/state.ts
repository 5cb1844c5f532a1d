/** Client-side session state: selections, the freeze set, and request sequencing.
 *
 * The freeze set lives here (the service is stateless about mutation) and is
 * serialized into every trace/compare request. Each panel tracks a request
 * sequence number so a stale response can never overwrite a newer one. */

import type { FreezeDoc } from "./types.js";

export class FreezeSet {
  private layers = new Map<number, Set<number>>();

  toggle(layer: number, filter: number): boolean {
    let set = this.layers.get(layer);
    if (!set) {
      set = new Set();
      this.layers.set(layer, set);
    }
    if (set.has(filter)) {
      set.delete(filter);
      if (set.size === 0) this.layers.delete(layer);
      return false;
    }
    set.add(filter);
    return true;
  }

  isFrozen(layer: number, filter: number): boolean {
    return this.layers.get(layer)?.has(filter) ?? false;
  }

  clear(): void {
    this.layers.clear();
  }

  count(): number {
    let n = 0;
    for (const set of this.layers.values()) n += set.size;
    return n;
  }

  /** Document form: layers ascending, filter lists ascending and duplicate-free. */
  toDoc(): FreezeDoc {
    const freezes = [...this.layers.entries()]
      .sort((a, b) => a[0] - b[0])
      .map(([layer, filters]) => ({ layer, filters: [...filters].sort((a, b) => a - b) }));
    return { freezes };
  }
}

/** Latest-request-wins gate: begin() hands out a ticket, accept() is true only
 * for the most recent ticket. One gate per panel. */
export class RequestGate {
  private seq = 0;

  begin(): number {
    return ++this.seq;
  }

  accept(ticket: number): boolean {
    return ticket === this.seq;
  }
}

export interface Selection {
  modelId: string | null;
  inputId: string | null;
  compareA: string | null;
  compareB: string | null;
  compareLayer: number | null;
}

export class SessionState {
  selection: Selection = {
    modelId: null,
    inputId: null,
    compareA: null,
    compareB: null,
    compareLayer: null,
  };
  freeze = new FreezeSet();
  gates = {
    trace: new RequestGate(),
    compare: new RequestGate(),
    inputs: new RequestGate(),
    saliency: new RequestGate(),
  };

  selectModel(modelId: string): void {
    if (this.selection.modelId !== modelId) {
      this.selection = {
        modelId,
        inputId: null,
        compareA: null,
        compareB: null,
        compareLayer: null,
      };
      this.freeze.clear();
    }
  }
}
