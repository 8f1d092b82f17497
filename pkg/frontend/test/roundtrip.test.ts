/** UI round trip against golden service fixtures: load the canned demo
 * session, raise a weight, recompute, and check the spider overlay updates
 * within one compute cycle with ranges byte-equal to the service response;
 * infeasible edits render the 422 diagnostics without crashing. */

import { describe, expect, it } from "vitest";

import { renderBanners } from "../src/panel.js";
import { renderSpider } from "../src/spider.js";
import { SessionController } from "../src/state.js";
import type { ProblemDoc, ProblemParameterDoc } from "../src/types.js";
import baseline from "./fixtures/compute_baseline.json";
import weighted from "./fixtures/compute_weighted.json";
import problemFixture from "./fixtures/problem.json";
import { MockApi } from "./mock_api.js";

const params = problemFixture.parameters as ProblemParameterDoc[];

function extractRanges(svg: string): string {
  const m = svg.match(/data-ranges="([^"]*)"/);
  if (!m) throw new Error("no overlay rendered");
  return m[1].replace(/&quot;/g, '"').replace(/&lt;/g, "<").replace(/&amp;/g, "&");
}

describe("UI round trip", () => {
  it("weight edit -> recompute updates the overlay in one compute cycle", async () => {
    const api = new MockApi();
    const c = new SessionController(api);
    await c.load(JSON.parse(JSON.stringify(problemFixture)) as ProblemDoc);
    await c.recompute("baseline");

    let svg = renderSpider(params, c.snapshot().overlays);
    expect(extractRanges(svg)).toBe(JSON.stringify(baseline.result.parameters));

    const computesBefore = api.calls.filter((x) => x === "compute").length;
    c.queueEdit({ weights: { x1: 3.0 } });
    await c.recompute("weighted");
    const computesAfter = api.calls.filter((x) => x === "compute").length;
    expect(computesAfter - computesBefore).toBe(1); // one compute cycle

    svg = renderSpider(params, c.snapshot().overlays);
    expect(extractRanges(svg)).toBe(JSON.stringify(weighted.result.parameters));
    expect(c.snapshot().status).toBe("idle");
  });

  it("renders 422 diagnostics without crashing", async () => {
    const api = new MockApi();
    const c = new SessionController(api);
    await c.load(JSON.parse(JSON.stringify(problemFixture)) as ProblemDoc);
    await c.recompute("baseline");
    c.queueEdit({ acceptance: { y: { upper: -5.0 } } });
    await c.recompute("infeasible edit");

    const snap = c.snapshot();
    const html = renderBanners(snap.banners);
    expect(html).toContain("infeasible_at_setpoint");
    expect(html).toContain("setpoint violates acceptance limits");
    // the diagnostic result renders with infeasible styling, never as a DS
    const svg = renderSpider(params, snap.overlays);
    expect(svg).toContain("overlay infeasible");
  });
});
