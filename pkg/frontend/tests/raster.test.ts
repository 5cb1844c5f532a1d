import { describe, expect, it } from "vitest";

import { Rasterizer } from "../src/raster.js";

describe("Rasterizer", () => {
  it("starts empty with the right pixel count", () => {
    const r = new Rasterizer(8, 8);
    expect(r.isEmpty()).toBe(true);
    expect(r.toPixels()).toHaveLength(64);
  });

  it("rejects degenerate grids", () => {
    expect(() => new Rasterizer(0, 8)).toThrow();
  });

  it("pen stamps ones inside the brush radius", () => {
    const r = new Rasterizer(8, 8);
    r.stamp(4, 4, 1.0, 1);
    expect(r.at(4, 4)).toBe(1);
    expect(r.at(5, 4)).toBe(1);
    expect(r.at(6, 4)).toBe(0);
    expect(r.at(0, 0)).toBe(0);
  });

  it("erase stamps zeros over drawn pixels", () => {
    const r = new Rasterizer(8, 8);
    r.stamp(3, 3, 2.0, 1);
    r.stamp(3, 3, 1.0, 0);
    expect(r.at(3, 3)).toBe(0);
    expect(r.at(5, 3)).toBe(1);
  });

  it("stroke leaves no gaps on a fast drag", () => {
    const r = new Rasterizer(16, 16);
    r.stroke(1, 1, 14, 1, 0.5, 1);
    for (let x = 1; x <= 14; x++) expect(r.at(x, 1)).toBe(1);
  });

  it("stays inside the grid near edges", () => {
    const r = new Rasterizer(4, 4);
    r.stamp(0, 0, 3.0, 1);
    expect(r.toPixels()).toHaveLength(16);
    expect(r.toPixels().every((v) => v === 0 || v === 1)).toBe(true);
  });

  it("all emitted pixels are in [0, 1]", () => {
    const r = new Rasterizer(6, 6);
    r.stroke(0, 0, 5, 5, 1.4, 1);
    r.stroke(5, 0, 0, 5, 0.8, 0);
    expect(r.toPixels().every((v) => v >= 0 && v <= 1)).toBe(true);
  });

  it("clear resets everything", () => {
    const r = new Rasterizer(5, 5);
    r.stamp(2, 2, 2, 1);
    r.clear();
    expect(r.isEmpty()).toBe(true);
  });
});
