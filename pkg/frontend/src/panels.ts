/** DOM construction for the three panels. All data arrives as view-model
 * structures; event handlers call back into main.ts actions. */

import type { CompareView, InputCard, LayerRow, StackView } from "./viewmodel.js";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export interface Handlers {
  onSelectModel(id: string): void;
  onSelectInput(id: string): void;
  onPickCompare(slot: "a" | "b", id: string): void;
  onToggleFreeze(layer: number, filter: number): void;
  onSelectCompareLayer(layer: number): void;
}

export function renderModelList(
  container: HTMLElement,
  models: { id: string; name: string }[],
  selected: string | null,
  handlers: Handlers,
): void {
  clear(container);
  for (const model of models) {
    const item = el("button", "list-item" + (model.id === selected ? " selected" : ""));
    item.append(el("span", "item-name", model.name));
    item.append(el("span", "item-id", model.id.slice(0, 8)));
    item.addEventListener("click", () => handlers.onSelectModel(model.id));
    container.append(item);
  }
  if (!models.length) container.append(el("p", "empty", "no models uploaded yet"));
}

export function renderInputList(
  container: HTMLElement,
  cards: InputCard[],
  selected: string | null,
  renderUrl: (id: string) => string,
  handlers: Handlers,
): void {
  clear(container);
  for (const card of cards) {
    const item = el("div", "input-card" + (card.id === selected ? " selected" : ""));
    if (card.thumbRenderId) {
      const img = el("img", "thumb") as HTMLImageElement;
      img.src = renderUrl(card.thumbRenderId);
      img.alt = card.id;
      item.append(img);
    }
    const meta = el("div", "input-meta");
    meta.append(el("span", "badge " + card.source, card.source));
    meta.append(el("span", "item-id", card.id.slice(0, 8)));
    meta.append(el("span", "dims", card.shapeLabel));
    if (card.attackLabel) meta.append(el("span", "attack-label", card.attackLabel));
    item.append(meta);
    item.addEventListener("click", () => handlers.onSelectInput(card.id));
    const pick = el("div", "pick-buttons");
    for (const slot of ["a", "b"] as const) {
      const btn = el("button", "pick", slot.toUpperCase());
      btn.addEventListener("click", (event) => {
        event.stopPropagation();
        handlers.onPickCompare(slot, card.id);
      });
      pick.append(btn);
    }
    item.append(pick);
    container.append(item);
  }
  if (!cards.length) container.append(el("p", "empty", "no inputs for this model"));
}

function layerHeader(row: LayerRow, expandable: boolean): HTMLElement {
  const head = el("div", "layer-head");
  head.append(el("span", "layer-index", String(row.index)));
  head.append(el("span", "layer-kind", row.kind));
  head.append(el("span", "layer-shape", row.shapeLabel));
  if (row.frozenFilters.length) {
    head.append(el("span", "frozen-note", `${row.frozenFilters.length} frozen`));
  }
  if (expandable) head.append(el("span", "expander", "▾"));
  return head;
}

export function renderLayerStack(
  container: HTMLElement,
  stack: StackView | { layers: LayerRow[] },
  expanded: Set<number>,
  renderUrl: (id: string) => string,
  handlers: Handlers,
): void {
  clear(container);
  if ("predictedClass" in stack) {
    const verdict = el("div", "verdict");
    verdict.append(el("span", "verdict-label", "predicted class"));
    verdict.append(el("span", "verdict-class", String(stack.predictedClass)));
    const probs = el("div", "probs");
    stack.finalProbs.forEach((p, i) => {
      const cell = el("div", "prob-cell" + (i === stack.predictedClass ? " winner" : ""));
      cell.append(el("span", "prob-class", String(i)));
      cell.append(el("span", "prob-value", String(p)));
      probs.append(cell);
    });
    container.append(verdict, probs);
  }
  for (const row of stack.layers) {
    const section = el("section", "layer" + (row.kind === "conv2d" ? " conv" : ""));
    const head = layerHeader(row, row.tiles.length > 0);
    section.append(head);
    if (row.tiles.length) {
      head.addEventListener("click", () => {
        if (expanded.has(row.index)) expanded.delete(row.index);
        else expanded.add(row.index);
        section.classList.toggle("expanded");
      });
      const grid = el("div", "filter-grid");
      for (const tile of row.tiles) {
        const cell = el("figure", "filter" + (tile.frozen ? " frozen" : ""));
        const img = el("img") as HTMLImageElement;
        img.src = renderUrl(tile.renderId);
        img.alt = `layer ${tile.layer} filter ${tile.filter}`;
        cell.append(img);
        cell.append(el("figcaption", "filter-label", String(tile.filter)));
        if (row.kind === "conv2d") {
          cell.title = tile.frozen ? "click to unfreeze" : "click to freeze";
          cell.addEventListener("click", () => handlers.onToggleFreeze(tile.layer, tile.filter));
        }
        grid.append(cell);
      }
      section.append(grid);
      if (expanded.has(row.index)) section.classList.add("expanded");
    }
    container.append(section);
  }
}

export function renderLayerPicker(
  container: HTMLSelectElement,
  layers: LayerRow[],
  selected: number | null,
): void {
  clear(container);
  const placeholder = el("option", undefined, "layer to intercept…") as HTMLOptionElement;
  placeholder.value = "";
  container.append(placeholder);
  for (const row of layers) {
    const option = el(
      "option",
      undefined,
      `${row.index} · ${row.kind} · ${row.shapeLabel}`,
    ) as HTMLOptionElement;
    option.value = String(row.index);
    if (selected === row.index) option.selected = true;
    container.append(option);
  }
}

export function renderCompare(
  container: HTMLElement,
  view: CompareView | null,
  renderUrl: (id: string) => string,
): void {
  clear(container);
  if (!view) {
    container.append(el("p", "empty", "pick inputs A and B, then a layer"));
    return;
  }
  const summary = el("div", "compare-summary");
  summary.append(el("span", undefined, "layer " + String(view.layerIndex)));
  summary.append(el("span", undefined, "aggregate L2 " + String(view.aggregateL2)));
  summary.append(el("span", undefined, "aggregate cosine " + String(view.aggregateCosine)));
  container.append(summary);

  const table = el("table", "diff-table");
  const head = el("tr");
  for (const title of ["ch", "A", "B", "|A−B|", "L2", "cosine", "max |Δ|"]) {
    head.append(el("th", undefined, title));
  }
  table.append(head);
  for (const row of view.rows) {
    const tr = el("tr");
    tr.append(el("td", "num", String(row.channel)));
    for (const renderId of [row.renderA, row.renderB, row.renderDiff]) {
      const td = el("td", "map-cell");
      const img = el("img", "map") as HTMLImageElement;
      img.src = renderUrl(renderId);
      td.append(img);
      tr.append(td);
    }
    tr.append(el("td", "num", String(row.l2)));
    tr.append(el("td", "num", String(row.cosine)));
    tr.append(el("td", "num", String(row.maxAbs)));
    table.append(tr);
  }
  container.append(table);
}
