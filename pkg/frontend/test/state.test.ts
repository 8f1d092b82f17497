import { describe, expect, it } from "vitest";

import { SessionController } from "../src/state.js";
import type { ProblemDoc } from "../src/types.js";
import problemFixture from "./fixtures/problem.json";
import { MockApi } from "./mock_api.js";

function freshProblem(): ProblemDoc {
  return JSON.parse(JSON.stringify(problemFixture)) as ProblemDoc;
}

describe("SessionController", () => {
  it("loads a session and tracks revisions through edits", async () => {
    const api = new MockApi();
    const c = new SessionController(api);
    await c.load(freshProblem());
    expect(c.snapshot().sessionId).toBe("s000000000001");
    expect(c.snapshot().revision).toBe(1);
    c.queueEdit({ weights: { x1: 2.0 } });
    await Promise.resolve();
    await new Promise((r) => setTimeout(r, 0));
    expect(c.snapshot().revision).toBe(2);
    expect(c.snapshot().problem?.parameters[0].weight).toBe(2.0);
  });

  it("serializes rapid recomputes without surfacing a 409", async () => {
    const api = new MockApi();
    api.computeDelayMs = 5;
    const c = new SessionController(api);
    await c.load(freshProblem());
    await Promise.all([c.recompute("a"), c.recompute("b")]);
    expect(api.maxConcurrentComputes).toBe(1);
    const banners = c.snapshot().banners;
    expect(banners.find((b) => b.code === "compute_in_flight")).toBeUndefined();
  });

  it("flushes queued edits before the follow-up compute", async () => {
    const api = new MockApi();
    api.computeDelayMs = 5;
    const c = new SessionController(api);
    await c.load(freshProblem());
    const first = c.recompute("first");
    c.queueEdit({ weights: { x1: 3.0 } });  // arrives mid-compute
    await first;
    await c.recompute("second");
    const patchIdx = api.calls.findIndex((x) => x.startsWith("patch"));
    const computeCalls = api.calls
      .map((x, i) => [x, i] as const)
      .filter(([x]) => x === "compute");
    expect(patchIdx).toBeGreaterThan(computeCalls[0][1]);
    expect(patchIdx).toBeLessThan(computeCalls[computeCalls.length - 1][1]);
  });

  it("keeps the latest result as the single unpinned overlay", async () => {
    const api = new MockApi();
    const c = new SessionController(api);
    await c.load(freshProblem());
    await c.recompute("one");
    await c.recompute("two");
    const overlays = c.snapshot().overlays;
    expect(overlays).toHaveLength(1);
    expect(overlays[0].label).toBe("two");
  });

  it("pins at most four overlays", async () => {
    const api = new MockApi();
    const c = new SessionController(api);
    await c.load(freshProblem());
    for (let i = 0; i < 5; i++) {
      await c.recompute(`run${i}`);
      c.pinCurrent(`pin${i}`);
    }
    const snap = c.snapshot();
    expect(snap.overlays.filter((o) => o.pinned)).toHaveLength(4);
    expect(snap.banners.find((b) => b.code === "pin_limit")).toBeDefined();
  });

  it("maps 422 to a non-blocking banner with the diagnostic result", async () => {
    const api = new MockApi();
    const c = new SessionController(api);
    await c.load(freshProblem());
    c.queueEdit({ setpoints: { x2: 0.9 } });  // MockApi flips to 422 mode
    await c.recompute("broken");
    const snap = c.snapshot();
    expect(snap.status).toBe("idle");  // never stuck
    const banner = snap.banners.find((b) => b.code === "infeasible_at_setpoint");
    expect(banner).toBeDefined();
    expect(banner!.kind).toBe("warning");
    const current = snap.overlays.find((o) => !o.pinned);
    expect(current?.result.feasible).toBe(false);
    expect(current?.label).toContain("infeasible");
  });

  it("marks slices stale when the revision moves on", async () => {
    const api = new MockApi();
    const c = new SessionController(api);
    await c.load(freshProblem());
    await c.refreshSlice();
    expect(c.snapshot().sliceStale).toBe(false);
    c.queueEdit({ weights: { x1: 1.5 } });
    await new Promise((r) => setTimeout(r, 0));
    expect(c.snapshot().sliceStale).toBe(true);
  });

  it("rejects identical slice dimensions", async () => {
    const api = new MockApi();
    const c = new SessionController(api);
    await c.load(freshProblem());
    c.setSliceDims("x1", "x1");
    expect(c.snapshot().banners.find((b) => b.code === "bad_dims")).toBeDefined();
    c.setSliceDims("x1", "x2");
    expect(c.snapshot().sliceDims).toEqual(["x1", "x2"]);
  });
});
