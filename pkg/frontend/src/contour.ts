/** 2-D feasibility slice: margin heatmap, zero contour, DS rectangle.
 *
 * The margin field comes from the service's exact-TI slice endpoint; the
 * zero-level line is traced by marching squares. The current design-space
 * rectangle for the two slice dimensions is overlaid; a slice computed at
 * an older revision renders greyed out with a refresh prompt. */

import { linearScale, zeroContourSegments } from "./geometry.js";
import type { DsResultDoc, SliceDoc } from "./types.js";

const W = 420;
const H = 420;
const PAD = 40;

export function renderContour(
  slice: SliceDoc,
  result: DsResultDoc | null,
  stale: boolean,
): string {
  const [nameA, nameB] = slice.dims;
  const ax = slice.axes[nameA];
  const ay = slice.axes[nameB];
  const sx = linearScale(ax[0], ax[ax.length - 1], PAD, W - PAD);
  const sy = linearScale(ay[0], ay[ay.length - 1], H - PAD, PAD);

  const parts: string[] = [];
  parts.push(
    `<svg class="contour${stale ? " stale" : ""}" viewBox="0 0 ${W} ${H}" width="${W}" height="${H}" xmlns="http://www.w3.org/2000/svg" data-revision="${slice.revision}">`,
  );

  // heatmap cells (sign -> color, magnitude -> opacity)
  const magnitudes = slice.margin.flat().map(Math.abs);
  const vmax = Math.max(1e-12, ...magnitudes);
  for (let i = 0; i + 1 < ax.length; i++) {
    for (let j = 0; j + 1 < ay.length; j++) {
      const v = slice.margin[i][j];
      const color = v >= 0 ? "#2a9d8f" : "#e76f51";
      const opacity = 0.15 + 0.6 * Math.min(1, Math.abs(v) / vmax);
      const x = sx(ax[i]);
      const y = sy(ay[j + 1]);
      parts.push(
        `<rect x="${x.toFixed(1)}" y="${y.toFixed(1)}" width="${(sx(ax[i + 1]) - x).toFixed(1)}" height="${(sy(ay[j]) - y).toFixed(1)}" fill="${color}" fill-opacity="${opacity.toFixed(3)}"/>`,
      );
    }
  }

  // zero-level contour of the worst-case margin
  for (const s of zeroContourSegments(ax, ay, slice.margin)) {
    parts.push(
      `<line class="zero" x1="${sx(s.x1).toFixed(2)}" y1="${sy(s.y1).toFixed(2)}" x2="${sx(s.x2).toFixed(2)}" y2="${sy(s.y2).toFixed(2)}" stroke="#111" stroke-width="1.5"/>`,
    );
  }

  // design-space rectangle for the two slice dimensions
  if (result && result.parameters && result.feasible) {
    const byName = new Map(result.parameters.map((p) => [p.name, p]));
    const pa = byName.get(nameA);
    const pb = byName.get(nameB);
    if (pa?.kind === "continuous" && pb?.kind === "continuous") {
      const x = sx(pa.lower);
      const y = sy(pb.upper);
      parts.push(
        `<rect class="ds-rect" x="${x.toFixed(2)}" y="${y.toFixed(2)}" width="${(sx(pa.upper) - x).toFixed(2)}" height="${(sy(pb.lower) - y).toFixed(2)}" fill="none" stroke="#1d3557" stroke-width="2" data-ranges="${JSON.stringify([pa.lower, pa.upper, pb.lower, pb.upper]).replace(/"/g, "&quot;")}"/>`,
      );
    }
  }

  // axes
  parts.push(
    `<text x="${W / 2}" y="${H - 8}" text-anchor="middle" font-size="11">${nameA}</text>`,
    `<text x="12" y="${H / 2}" text-anchor="middle" font-size="11" transform="rotate(-90 12 ${H / 2})">${nameB}</text>`,
  );
  parts.push("</svg>");
  if (stale) {
    parts.push(
      `<div class="stale-note">slice computed at revision ${slice.revision}; refresh to update</div>`,
    );
  }
  return parts.join("");
}
