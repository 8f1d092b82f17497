/** Pure geometry for the spider chart and contour panel (no DOM). */

import type { ContinuousRange, ParameterRange, ProblemParameterDoc } from "./types.js";

export interface SpiderLayout {
  cx: number;
  cy: number;
  radius: number;
  axes: { name: string; angle: number; lo: number; hi: number }[];
}

/** One axis per parameter, twelve o'clock first, clockwise. Continuous axes
 * span the screening bounds; categorical axes span the level count. */
export function spiderLayout(
  params: ProblemParameterDoc[],
  size: number,
  margin = 48,
): SpiderLayout {
  const cx = size / 2;
  const cy = size / 2;
  const radius = size / 2 - margin;
  const n = params.length;
  const axes = params.map((p, k) => {
    const angle = -Math.PI / 2 + (2 * Math.PI * k) / n;
    if (p.kind === "continuous" && p.bounds) {
      return { name: p.name, angle, lo: p.bounds[0], hi: p.bounds[1] };
    }
    return { name: p.name, angle, lo: 0, hi: (p.levels ?? []).length };
  });
  return { cx, cy, radius, axes };
}

/** Raw value -> radius in px (linear over the axis span). */
export function valueToRadius(layout: SpiderLayout, axis: number, value: number): number {
  const a = layout.axes[axis];
  return ((value - a.lo) / (a.hi - a.lo)) * layout.radius;
}

/** Radius in px -> raw value. Inverse of valueToRadius. */
export function radiusToValue(layout: SpiderLayout, axis: number, r: number): number {
  const a = layout.axes[axis];
  return a.lo + (r / layout.radius) * (a.hi - a.lo);
}

export function axisPoint(
  layout: SpiderLayout,
  axis: number,
  value: number,
): [number, number] {
  const a = layout.axes[axis];
  const r = valueToRadius(layout, axis, value);
  return [layout.cx + r * Math.cos(a.angle), layout.cy + r * Math.sin(a.angle)];
}

function rangeOnAxis(range: ParameterRange, axis: { lo: number; hi: number }): [number, number] {
  if (range.kind === "continuous") {
    return [range.lower, range.upper];
  }
  // categorical: the admitted-level count maps onto 0..k
  return [0, range.levels.length];
}

/** Polygon pair (lower/upper boundary traces) for one result. */
export function resultPolygons(
  layout: SpiderLayout,
  parameters: ParameterRange[],
): { lower: [number, number][]; upper: [number, number][] } {
  const lower: [number, number][] = [];
  const upper: [number, number][] = [];
  parameters.forEach((range, k) => {
    const [lo, hi] = rangeOnAxis(range, layout.axes[k]);
    lower.push(axisPoint(layout, k, lo));
    upper.push(axisPoint(layout, k, hi));
  });
  return { lower, upper };
}

export function toPath(points: [number, number][], close = true): string {
  const body = points
    .map(([x, y], i) => `${i === 0 ? "M" : "L"}${x.toFixed(2)},${y.toFixed(2)}`)
    .join(" ");
  return close ? `${body} Z` : body;
}

export interface Segment {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

/** Zero-level segments of a scalar field by marching squares with linear
 * interpolation. `field[i][j]` is the value at (ax[i], ay[j]). */
export function zeroContourSegments(
  ax: number[],
  ay: number[],
  field: number[][],
): Segment[] {
  const segs: Segment[] = [];
  const lerp = (a: number, b: number, va: number, vb: number) =>
    a + ((0 - va) / (vb - va)) * (b - a);
  for (let i = 0; i + 1 < ax.length; i++) {
    for (let j = 0; j + 1 < ay.length; j++) {
      const v00 = field[i][j];
      const v10 = field[i + 1][j];
      const v01 = field[i][j + 1];
      const v11 = field[i + 1][j + 1];
      const pts: [number, number][] = [];
      if (v00 > 0 !== v10 > 0) pts.push([lerp(ax[i], ax[i + 1], v00, v10), ay[j]]);
      if (v01 > 0 !== v11 > 0) pts.push([lerp(ax[i], ax[i + 1], v01, v11), ay[j + 1]]);
      if (v00 > 0 !== v01 > 0) pts.push([ax[i], lerp(ay[j], ay[j + 1], v00, v01)]);
      if (v10 > 0 !== v11 > 0) pts.push([ax[i + 1], lerp(ay[j], ay[j + 1], v10, v11)]);
      if (pts.length === 2) {
        segs.push({ x1: pts[0][0], y1: pts[0][1], x2: pts[1][0], y2: pts[1][1] });
      } else if (pts.length === 4) {
        // saddle cell: pair crossings by order, good enough for display
        segs.push({ x1: pts[0][0], y1: pts[0][1], x2: pts[2][0], y2: pts[2][1] });
        segs.push({ x1: pts[1][0], y1: pts[1][1], x2: pts[3][0], y2: pts[3][1] });
      }
    }
  }
  return segs;
}

/** Linear map builder from data coordinates to pixel coordinates. */
export function linearScale(
  d0: number,
  d1: number,
  p0: number,
  p1: number,
): (v: number) => number {
  const k = (p1 - p0) / (d1 - d0);
  return (v: number) => p0 + (v - d0) * k;
}

export function continuousRanges(parameters: ParameterRange[]): ContinuousRange[] {
  return parameters.filter((p): p is ContinuousRange => p.kind === "continuous");
}
