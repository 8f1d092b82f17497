/** JSON shapes exchanged with the design-space service (schema_version 1). */

export interface ContinuousRange {
  name: string;
  kind: "continuous";
  lower: number;
  upper: number;
}

export interface CategoricalRange {
  name: string;
  kind: "categorical";
  levels: string[];
  effect_range: [number, number] | null;
}

export type ParameterRange = ContinuousRange | CategoricalRange;

export interface DsResultDoc {
  schema_version: number;
  feasible: boolean;
  parameters: ParameterRange[] | null;
  volume: { weighted: number | null; unweighted: number | null };
  normalized: { dims: string[]; lower: number[] | null; upper: number[] | null };
  certificate: unknown;
  passes: unknown[];
  failure: { stage: string; message: string } | null;
  seed: number;
  config: Record<string, unknown>;
}

export interface ProblemParameterDoc {
  name: string;
  kind: "continuous" | "categorical";
  bounds?: [number, number];
  levels?: string[];
  setpoint: number | string;
  weight: number;
}

export interface ProblemDoc {
  schema_version: number;
  parameters: ProblemParameterDoc[];
  responses: {
    name: string;
    acceptance: { lower: number | null; upper: number | null };
    [k: string]: unknown;
  }[];
  optimizer: Record<string, unknown>;
}

export interface SessionStateDoc {
  id: string;
  revision: number;
  problem: ProblemDoc;
  result: DsResultDoc | null;
  result_revision: number | null;
}

export interface SliceDoc {
  dims: [string, string];
  revision: number;
  result_revision: number | null;
  resolution: number;
  axes: Record<string, number[]>;
  margin: number[][];
  per_response: Record<string, number[][]>;
}

export interface ComputeResponse {
  revision: number;
  result: DsResultDoc;
}

export interface ServiceError {
  code: string;
  message: string;
  diagnostics?: unknown;
  result?: DsResultDoc;
  status: number;
}

export interface PatchBody {
  weights?: Record<string, number>;
  setpoints?: Record<string, number | string>;
  acceptance?: Record<string, { lower?: number | null; upper?: number | null }>;
  optimizer?: Record<string, unknown>;
}
