/** Sketchpad rasterizer: a model-sized grid of [0,1] intensities.
 *
 * Pointer events land here as strokes; the canvas element only displays the
 * grid. Pen stamps 1.0 and erase stamps 0.0 inside a circular brush, with
 * stroke segments interpolated so fast drags leave no gaps. */

export class Rasterizer {
  readonly width: number;
  readonly height: number;
  private grid: Float32Array;

  constructor(width: number, height: number) {
    if (width < 1 || height < 1) {
      throw new Error(`grid must be at least 1x1, got ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    this.grid = new Float32Array(width * height);
  }

  at(x: number, y: number): number {
    return this.grid[y * this.width + x];
  }

  clear(): void {
    this.grid.fill(0);
  }

  stamp(cx: number, cy: number, radius: number, value: number): void {
    const r = Math.max(0, radius);
    const x0 = Math.max(0, Math.floor(cx - r));
    const x1 = Math.min(this.width - 1, Math.ceil(cx + r));
    const y0 = Math.max(0, Math.floor(cy - r));
    const y1 = Math.min(this.height - 1, Math.ceil(cy + r));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy <= r * r) {
          this.grid[y * this.width + x] = value;
        }
      }
    }
  }

  /** Stamp along the segment from (x0,y0) to (x1,y1) with sub-pixel steps. */
  stroke(x0: number, y0: number, x1: number, y1: number, radius: number, value: number): void {
    const steps = Math.max(1, Math.ceil(Math.hypot(x1 - x0, y1 - y0) * 2));
    for (let i = 0; i <= steps; i++) {
      const t = i / steps;
      this.stamp(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, radius, value);
    }
  }

  /** Flat row-major copy, ready for POST /models/{id}/sketch. */
  toPixels(): number[] {
    return Array.from(this.grid);
  }

  isEmpty(): boolean {
    return this.grid.every((v) => v === 0);
  }
}
