import { describe, expect, it } from "vitest";

import { renderSpider } from "../src/spider.js";
import type { Overlay } from "../src/state.js";
import type { DsResultDoc, ProblemParameterDoc } from "../src/types.js";
import baseline from "./fixtures/compute_baseline.json";
import weighted from "./fixtures/compute_weighted.json";
import problemFixture from "./fixtures/problem.json";

const params = problemFixture.parameters as ProblemParameterDoc[];

function overlay(label: string, revision: number, result: DsResultDoc,
                 pinned = false): Overlay {
  return { label, revision, result, pinned };
}

function rangesAttr(svg: string, label: string): string {
  const match = svg.match(
    new RegExp(`data-label="${label}" data-ranges="([^"]*)"`),
  );
  if (!match) throw new Error(`overlay ${label} not found`);
  return match[1]
    .replace(/&quot;/g, '"')
    .replace(/&lt;/g, "<")
    .replace(/&amp;/g, "&");
}

describe("renderSpider", () => {
  it("serializes displayed ranges byte-equal to the service response", () => {
    const result = baseline.result as DsResultDoc;
    const svg = renderSpider(params, [overlay("baseline", 2, result)]);
    expect(rangesAttr(svg, "baseline")).toBe(JSON.stringify(result.parameters));
  });

  it("draws one polygon pair per overlay and a legend with volumes", () => {
    const svg = renderSpider(params, [
      overlay("baseline", 2, baseline.result as DsResultDoc, true),
      overlay("weighted", 4, weighted.result as DsResultDoc),
    ]);
    expect((svg.match(/class="upper"/g) ?? []).length).toBe(2);
    expect((svg.match(/class="lower"/g) ?? []).length).toBe(2);
    expect(svg).toContain(`volume=${String(baseline.result.volume.unweighted)}`);
    expect(svg).toContain(`volume=${String(weighted.result.volume.unweighted)}`);
  });

  it("disables overlays whose parameter sets differ", () => {
    const alien = JSON.parse(JSON.stringify(baseline.result)) as DsResultDoc;
    alien.parameters![0].name = "other";
    const svg = renderSpider(params, [overlay("alien", 9, alien)]);
    expect(svg).toContain('class="overlay disabled"');
    expect(svg).toContain('data-reason="parameter sets differ"');
  });

  it("styles infeasible results distinctly", () => {
    const infeasible = JSON.parse(JSON.stringify(baseline.result)) as DsResultDoc;
    infeasible.feasible = false;
    const svg = renderSpider(params, [overlay("bad", 3, infeasible)]);
    expect(svg).toContain('class="overlay infeasible"');
    expect(svg).toContain("stroke-dasharray");
    expect(svg).toContain("infeasible");
  });
});
