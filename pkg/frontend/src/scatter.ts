/** Geometry and colors for the 2-D latent scatter. */

export interface Bounds {
  minX: number;
  maxX: number;
  minY: number;
  maxY: number;
}

export interface XY {
  x: number;
  y: number;
}

/** Data-space bounding box; degenerate axes are padded so scaling works. */
export function dataBounds(items: XY[]): Bounds {
  if (items.length === 0) {
    return { minX: -1, maxX: 1, minY: -1, maxY: 1 };
  }
  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const it of items) {
    minX = Math.min(minX, it.x);
    maxX = Math.max(maxX, it.x);
    minY = Math.min(minY, it.y);
    maxY = Math.max(maxY, it.y);
  }
  if (minX === maxX) {
    minX -= 1;
    maxX += 1;
  }
  if (minY === maxY) {
    minY -= 1;
    maxY += 1;
  }
  return { minX, maxX, minY, maxY };
}

export type ToPixel = (x: number, y: number) => [number, number];

/**
 * Linear data→pixel map into a margin-inset box, y axis flipped so that
 * larger data y plots higher on the canvas.
 */
export function makeTransform(
  bounds: Bounds,
  width: number,
  height: number,
  margin = 20,
): ToPixel {
  const spanX = bounds.maxX - bounds.minX;
  const spanY = bounds.maxY - bounds.minY;
  const innerW = width - 2 * margin;
  const innerH = height - 2 * margin;
  return (x, y) => [
    margin + ((x - bounds.minX) / spanX) * innerW,
    margin + (1 - (y - bounds.minY) / spanY) * innerH,
  ];
}

// One distinguishable color per digit class, reused cyclically beyond 10.
export const CLASS_COLORS: readonly string[] = [
  "#4363d8",
  "#e6194b",
  "#3cb44b",
  "#ffe119",
  "#911eb4",
  "#f58231",
  "#46f0f0",
  "#f032e6",
  "#9a6324",
  "#808000",
];

export function colorFor(label: number): string {
  return CLASS_COLORS[((label % CLASS_COLORS.length) + CLASS_COLORS.length) %
    CLASS_COLORS.length] as string;
}

/**
 * Index of the item closest to (px, py) within `radius` pixels, or -1.
 * Ties go to the earliest item so repeated clicks are stable.
 */
export function hitTest(
  items: XY[],
  px: number,
  py: number,
  radius: number,
): number {
  let best = -1;
  let bestD2 = Infinity;
  const limit = radius * radius;
  for (let i = 0; i < items.length; i++) {
    const it = items[i] as XY;
    const dx = it.x - px;
    const dy = it.y - py;
    const d2 = dx * dx + dy * dy;
    if (d2 <= limit && d2 < bestD2) {
      best = i;
      bestD2 = d2;
    }
  }
  return best;
}
