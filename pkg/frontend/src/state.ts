/** Session view state: overlays, edit queue, compute status, banners.
 *
 * Edits arriving while a compute is in flight queue locally (FIFO) and are
 * flushed before the follow-up compute, so the user never sees a 409. At
 * most four overlays can be pinned for comparison; the latest result always
 * occupies the (single) unpinned "current" slot. */

import type { ApiClient } from "./api.js";
import { isServiceError } from "./api.js";
import type {
  DsResultDoc,
  PatchBody,
  ProblemDoc,
  SliceDoc,
} from "./types.js";

export type ComputeStatus = "idle" | "running" | "error";

export interface Overlay {
  label: string;
  revision: number;
  result: DsResultDoc;
  pinned: boolean;
}

export interface Banner {
  kind: "error" | "warning" | "info";
  code: string;
  message: string;
}

export const MAX_PINNED = 4;

export interface ViewStateSnapshot {
  sessionId: string | null;
  revision: number;
  status: ComputeStatus;
  overlays: Overlay[];
  banners: Banner[];
  sliceDims: [string, string] | null;
  slice: SliceDoc | null;
  sliceStale: boolean;
  problem: ProblemDoc | null;
}

export class SessionController {
  private sessionId: string | null = null;
  private revision = 0;
  private status: ComputeStatus = "idle";
  private overlays: Overlay[] = [];
  private banners: Banner[] = [];
  private editQueue: PatchBody[] = [];
  private computePending = false;
  private inFlight: Promise<void> | null = null;
  private problem: ProblemDoc | null = null;
  private sliceDims: [string, string] | null = null;
  private slice: SliceDoc | null = null;
  private listeners: ((s: ViewStateSnapshot) => void)[] = [];

  constructor(private api: ApiClient) {}

  subscribe(fn: (s: ViewStateSnapshot) => void): void {
    this.listeners.push(fn);
  }

  snapshot(): ViewStateSnapshot {
    return {
      sessionId: this.sessionId,
      revision: this.revision,
      status: this.status,
      overlays: [...this.overlays],
      banners: [...this.banners],
      sliceDims: this.sliceDims,
      slice: this.slice,
      sliceStale:
        this.slice !== null && this.slice.revision !== this.revision,
      problem: this.problem,
    };
  }

  private emit(): void {
    const snap = this.snapshot();
    for (const fn of this.listeners) fn(snap);
  }

  private pushBanner(banner: Banner): void {
    this.banners = [...this.banners.filter((b) => b.code !== banner.code), banner];
    this.emit();
  }

  clearBanners(): void {
    this.banners = [];
    this.emit();
  }

  async load(problem: ProblemDoc): Promise<void> {
    const created = await this.api.createSession(problem);
    this.sessionId = created.id;
    this.revision = created.revision;
    this.problem = problem;
    this.overlays = [];
    const params = problem.parameters;
    this.sliceDims =
      params.length >= 2 ? [params[0].name, params[1].name] : null;
    this.emit();
  }

  /** Queue an edit; applied immediately when idle, deferred while running. */
  queueEdit(edit: PatchBody): void {
    this.editQueue.push(edit);
    if (this.status !== "running") {
      void this.flushEdits();
    }
  }

  private async flushEdits(): Promise<void> {
    if (!this.sessionId) return;
    while (this.editQueue.length) {
      const edit = this.editQueue.shift()!;
      try {
        const r = await this.api.patchProblem(this.sessionId, edit);
        this.revision = r.revision;
        this.applyEditLocally(edit);
      } catch (e) {
        this.pushBanner(this.toBanner(e));
        return;
      }
    }
    this.emit();
  }

  private applyEditLocally(edit: PatchBody): void {
    if (!this.problem) return;
    for (const [name, w] of Object.entries(edit.weights ?? {})) {
      const p = this.problem.parameters.find((x) => x.name === name);
      if (p) p.weight = w;
    }
    for (const [name, s] of Object.entries(edit.setpoints ?? {})) {
      const p = this.problem.parameters.find((x) => x.name === name);
      if (p) p.setpoint = s;
    }
    for (const [name, acc] of Object.entries(edit.acceptance ?? {})) {
      const r = this.problem.responses.find((x) => x.name === name);
      if (r) r.acceptance = { ...r.acceptance, ...acc };
    }
    if (edit.optimizer) {
      this.problem.optimizer = { ...this.problem.optimizer, ...edit.optimizer };
    }
  }

  /** Edit-and-recompute: flush queued edits, run the engine, append the
   * result as the current overlay. A recompute requested while one runs
   * waits for it instead of surfacing a 409. */
  async recompute(label = "latest"): Promise<void> {
    if (this.inFlight) {
      this.computePending = true;
      await this.inFlight;
      if (!this.computePending) return;
    }
    this.computePending = false;
    const run = this.runCompute(label);
    this.inFlight = run;
    try {
      await run;
    } finally {
      this.inFlight = null;
      if (this.computePending) {
        await this.recompute(label);
      }
    }
  }

  private async runCompute(label: string): Promise<void> {
    if (!this.sessionId) return;
    this.status = "running";
    this.emit();
    await this.flushEdits();
    try {
      const res = await this.api.compute(this.sessionId);
      this.revision = res.revision;
      this.setCurrentOverlay({
        label,
        revision: res.revision,
        result: res.result,
        pinned: false,
      });
      this.status = "idle";
      this.emit();
    } catch (e) {
      this.status = "error";
      const banner = this.toBanner(e);
      if (isServiceError(e) && e.status === 422) {
        banner.kind = "warning";
        if (isServiceError(e) && e.result) {
          // infeasible-at-setpoint still carries a diagnostic result
          this.setCurrentOverlay({
            label: `${label} (infeasible)`,
            revision: this.revision + 1,
            result: e.result,
            pinned: false,
          });
          this.revision += 1;
        }
      }
      this.pushBanner(banner);
      this.status = "idle";
      this.emit();
    }
  }

  private toBanner(e: unknown): Banner {
    if (isServiceError(e)) {
      return { kind: "error", code: e.code, message: e.message };
    }
    return {
      kind: "error",
      code: "network",
      message: e instanceof Error ? e.message : String(e),
    };
  }

  private setCurrentOverlay(overlay: Overlay): void {
    this.overlays = [...this.overlays.filter((o) => o.pinned), overlay];
  }

  /** Pin the current overlay for comparison (up to four). */
  pinCurrent(label?: string): boolean {
    const current = this.overlays.find((o) => !o.pinned);
    if (!current) return false;
    if (this.overlays.filter((o) => o.pinned).length >= MAX_PINNED) {
      this.pushBanner({
        kind: "info",
        code: "pin_limit",
        message: `at most ${MAX_PINNED} overlays can be pinned`,
      });
      return false;
    }
    current.pinned = true;
    if (label) current.label = label;
    this.emit();
    return true;
  }

  unpin(revision: number): void {
    this.overlays = this.overlays.filter(
      (o) => !(o.pinned && o.revision === revision),
    );
    this.emit();
  }

  async refreshSlice(fixed: Record<string, number> = {}): Promise<void> {
    if (!this.sessionId || !this.sliceDims) return;
    try {
      this.slice = await this.api.slice(this.sessionId, this.sliceDims, fixed);
      this.emit();
    } catch (e) {
      this.pushBanner(this.toBanner(e));
    }
  }

  setSliceDims(a: string, b: string): void {
    if (a === b) {
      this.pushBanner({
        kind: "error",
        code: "bad_dims",
        message: "slice dimensions must be two distinct parameters",
      });
      return;
    }
    this.sliceDims = [a, b];
    this.slice = null;
    this.emit();
  }
}
