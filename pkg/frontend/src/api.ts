/** Thin typed client for the design-space HTTP service. The UI does no
 * design-space math of its own; everything displayed comes from these
 * responses. */

import type {
  ComputeResponse,
  PatchBody,
  ProblemDoc,
  ServiceError,
  SessionStateDoc,
  SliceDoc,
} from "./types.js";

export interface ApiClient {
  createSession(problem: ProblemDoc): Promise<{ id: string; revision: number }>;
  getSession(id: string): Promise<SessionStateDoc>;
  patchProblem(id: string, patch: PatchBody): Promise<{ revision: number }>;
  compute(id: string, query?: Record<string, string>): Promise<ComputeResponse>;
  slice(
    id: string,
    dims: [string, string],
    fixed: Record<string, number>,
    resolution?: number,
  ): Promise<SliceDoc>;
}

export class HttpApiClient implements ApiClient {
  constructor(
    private baseUrl: string = "",
    private token: string | null = null,
  ) {}

  private headers(): Record<string, string> {
    const h: Record<string, string> = { "content-type": "application/json" };
    if (this.token) h.authorization = `Bearer ${this.token}`;
    return h;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await res.json().catch(() => ({}));
    if (!res.ok) {
      const err: ServiceError = {
        code: payload.code ?? "http_error",
        message: payload.message ?? `${method} ${path} failed (${res.status})`,
        diagnostics: payload.diagnostics,
        result: payload.result,
        status: res.status,
      };
      throw err;
    }
    return payload as T;
  }

  createSession(problem: ProblemDoc) {
    return this.request<{ id: string; revision: number }>("POST", "/sessions", problem);
  }

  getSession(id: string) {
    return this.request<SessionStateDoc>("GET", `/sessions/${id}`);
  }

  patchProblem(id: string, patch: PatchBody) {
    return this.request<{ revision: number }>("PATCH", `/sessions/${id}/problem`, patch);
  }

  compute(id: string, query: Record<string, string> = {}) {
    const qs = new URLSearchParams(query).toString();
    return this.request<ComputeResponse>(
      "POST",
      `/sessions/${id}/compute${qs ? "?" + qs : ""}`,
    );
  }

  slice(
    id: string,
    dims: [string, string],
    fixed: Record<string, number>,
    resolution = 41,
  ) {
    const fixedStr = Object.entries(fixed)
      .map(([k, v]) => `${k}=${v}`)
      .join(",");
    const qs = new URLSearchParams({
      dims: dims.join(","),
      resolution: String(resolution),
      ...(fixedStr ? { fixed: fixedStr } : {}),
    });
    return this.request<SliceDoc>("GET", `/sessions/${id}/slice?${qs}`);
  }
}

export function isServiceError(e: unknown): e is ServiceError {
  return typeof e === "object" && e !== null && "code" in e && "status" in e;
}
