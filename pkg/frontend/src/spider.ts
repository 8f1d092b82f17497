/** Spider (radar) chart of design-space ranges as SVG markup.
 *
 * One axis per parameter scaled to its screening bounds; every overlay
 * draws a polygon pair (lower and upper range traces). The numbers shown
 * in the legend and stored in data attributes are taken verbatim from the
 * service response. */

import {
  resultPolygons,
  spiderLayout,
  toPath,
} from "./geometry.js";
import type { Overlay } from "./state.js";
import type { ProblemParameterDoc } from "./types.js";

const COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/"/g, "&quot;");
}

export function renderSpider(
  params: ProblemParameterDoc[],
  overlays: Overlay[],
  size = 420,
): string {
  const layout = spiderLayout(params, size);
  const parts: string[] = [];
  parts.push(
    `<svg class="spider" viewBox="0 0 ${size} ${size}" width="${size}" height="${size}" xmlns="http://www.w3.org/2000/svg">`,
  );

  // grid rings + axes
  for (const f of [0.25, 0.5, 0.75, 1.0]) {
    const ring = layout.axes
      .map((a, k) => {
        const r = layout.radius * f;
        const x = layout.cx + r * Math.cos(a.angle);
        const y = layout.cy + r * Math.sin(a.angle);
        return `${k === 0 ? "M" : "L"}${x.toFixed(2)},${y.toFixed(2)}`;
      })
      .join(" ");
    parts.push(`<path class="ring" d="${ring} Z" fill="none" stroke="#ddd"/>`);
  }
  layout.axes.forEach((a, k) => {
    const x = layout.cx + layout.radius * Math.cos(a.angle);
    const y = layout.cy + layout.radius * Math.sin(a.angle);
    parts.push(
      `<line class="axis" x1="${layout.cx}" y1="${layout.cy}" x2="${x.toFixed(2)}" y2="${y.toFixed(2)}" stroke="#999"/>`,
    );
    const lx = layout.cx + (layout.radius + 16) * Math.cos(a.angle);
    const ly = layout.cy + (layout.radius + 16) * Math.sin(a.angle);
    parts.push(
      `<text class="axis-label" x="${lx.toFixed(2)}" y="${ly.toFixed(2)}" text-anchor="middle" font-size="11">${esc(a.name)}</text>`,
    );
  });

  const names = params.map((p) => p.name);
  overlays.forEach((overlay, idx) => {
    const result = overlay.result;
    if (!result.parameters) return;
    const resultNames = result.parameters.map((p) => p.name);
    if (JSON.stringify(resultNames) !== JSON.stringify(names)) {
      parts.push(
        `<g class="overlay disabled" data-label="${esc(overlay.label)}" data-reason="parameter sets differ"></g>`,
      );
      return;
    }
    const color = COLORS[idx % COLORS.length];
    const { lower, upper } = resultPolygons(layout, result.parameters);
    const cls = result.feasible ? "overlay" : "overlay infeasible";
    const dash = result.feasible ? "" : ' stroke-dasharray="4 3"';
    // ranges are serialized verbatim so tests can check byte equality
    parts.push(
      `<g class="${cls}" data-revision="${overlay.revision}" data-label="${esc(overlay.label)}" data-ranges="${esc(JSON.stringify(result.parameters))}">`,
    );
    parts.push(
      `<path class="upper" d="${toPath(upper)}" fill="${color}" fill-opacity="${result.feasible ? 0.12 : 0.04}" stroke="${color}"${dash}/>`,
    );
    parts.push(
      `<path class="lower" d="${toPath(lower)}" fill="none" stroke="${color}" stroke-opacity="0.7"${dash}/>`,
    );
    parts.push("</g>");
  });
  parts.push("</svg>");

  const legend = overlays
    .map((o, idx) => {
      const volume = o.result.volume.unweighted;
      const tag = o.result.feasible ? "" : " — infeasible";
      return (
        `<li class="legend-item${o.result.feasible ? "" : " infeasible"}" data-revision="${o.revision}">` +
        `<span class="swatch" style="background:${COLORS[idx % COLORS.length]}"></span>` +
        `${esc(o.label)} (rev ${o.revision}${tag}) volume=${volume === null ? "n/a" : String(volume)}` +
        `</li>`
      );
    })
    .join("");
  return `${parts.join("")}<ul class="legend">${legend}</ul>`;
}
