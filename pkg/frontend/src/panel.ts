/** Parameter / response / optimizer edit panel (HTML markup builders). */

import type { Banner } from "./state.js";
import type { ProblemDoc } from "./types.js";

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/"/g, "&quot;");
}

export function renderPanel(problem: ProblemDoc): string {
  const rows = problem.parameters
    .map((p) => {
      const span =
        p.kind === "continuous" && p.bounds
          ? `[${p.bounds[0]}, ${p.bounds[1]}]`
          : (p.levels ?? []).join(", ");
      const setpointInput =
        p.kind === "continuous"
          ? `<input type="number" step="any" name="setpoint:${esc(p.name)}" value="${p.setpoint}">`
          : `<select name="setpoint:${esc(p.name)}">${(p.levels ?? [])
              .map(
                (l) =>
                  `<option value="${esc(l)}"${l === p.setpoint ? " selected" : ""}>${esc(l)}</option>`,
              )
              .join("")}</select>`;
      return (
        `<tr data-param="${esc(p.name)}">` +
        `<td>${esc(p.name)}</td><td class="range">${esc(span)}</td>` +
        `<td>${setpointInput}</td>` +
        `<td><input type="number" step="0.1" min="0.1" name="weight:${esc(p.name)}" value="${p.weight}"></td>` +
        `</tr>`
      );
    })
    .join("");

  const responses = problem.responses
    .map(
      (r) =>
        `<tr data-response="${esc(r.name)}"><td>${esc(r.name)}</td>` +
        `<td><input type="number" step="any" name="acc-lower:${esc(r.name)}" value="${r.acceptance?.lower ?? ""}" placeholder="-inf"></td>` +
        `<td><input type="number" step="any" name="acc-upper:${esc(r.name)}" value="${r.acceptance?.upper ?? ""}" placeholder="+inf"></td></tr>`,
    )
    .join("");

  return (
    `<table class="params"><thead><tr><th>parameter</th><th>screening</th><th>setpoint</th><th>weight</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>` +
    `<table class="responses"><thead><tr><th>response</th><th>lower limit</th><th>upper limit</th></tr></thead>` +
    `<tbody>${responses}</tbody></table>` +
    `<div class="optimizer-row">` +
    `<label>second pass <select name="opt:pass2_method">` +
    ["cobyla", "slsqp", "none"]
      .map(
        (m) =>
          `<option value="${m}"${problem.optimizer?.pass2_method === m ? " selected" : ""}>${m}</option>`,
      )
      .join("") +
    `</select></label>` +
    `<label>starts <input type="number" name="opt:n_starts" min="1" value="${problem.optimizer?.n_starts ?? 1}"></label>` +
    `<button class="recompute">recompute</button>` +
    `<button class="pin">pin overlay</button>` +
    `<button class="refresh-slice">refresh slice</button>` +
    `</div>`
  );
}

export function renderBanners(banners: Banner[]): string {
  return banners
    .map(
      (b) =>
        `<div class="banner ${b.kind}" data-code="${esc(b.code)}">${esc(b.message)}</div>`,
    )
    .join("");
}

export function renderStatus(status: string, revision: number): string {
  return `<span class="status status-${status}">${status}</span> <span class="revision">revision ${revision}</span>`;
}
