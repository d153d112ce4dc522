/**
 * Report file loading and validation, plus re-scoring of a loaded report
 * under a new importance vector.
 */

import {
  Band,
  ComponentIndices,
  ImportanceLevels,
  band,
  composeHem,
  rank,
} from "./hem.js";

export const SCHEMA_VERSION = 1;

export interface AlgorithmEntry {
  personalized: boolean;
  completed: boolean;
  components: ComponentIndices | null;
  hem_score: number | null;
  band: string | null;
}

export interface ReportFile {
  schema_version: number;
  config_fingerprint: string;
  importance: { use_case_name: string; levels: ImportanceLevels };
  algorithms: Record<string, AlgorithmEntry>;
  ranking: string[];
  notes: string[];
}

export class ReportError extends Error {}

function isNumberOrNull(value: unknown): boolean {
  return value === null || typeof value === "number";
}

function validComponents(value: unknown): value is ComponentIndices {
  if (typeof value !== "object" || value === null) return false;
  const record = value as Record<string, unknown>;
  for (const key of ["accuracy", "convergence", "comp_efficiency", "fairness"]) {
    const entry = record[key];
    if (typeof entry !== "number" || entry < 0 || entry > 1) return false;
  }
  return isNumberOrNull(record["personalization"] ?? null);
}

export function parseReport(text: string): ReportFile {
  let payload: unknown;
  try {
    payload = JSON.parse(text);
  } catch (error) {
    throw new ReportError(`not valid JSON: ${(error as Error).message}`);
  }
  if (typeof payload !== "object" || payload === null) {
    throw new ReportError("report root must be a JSON object");
  }
  const report = payload as Record<string, unknown>;
  if (report["schema_version"] !== SCHEMA_VERSION) {
    throw new ReportError(
      `unsupported schema_version ${JSON.stringify(report["schema_version"])}; expected ${SCHEMA_VERSION}`,
    );
  }
  const algorithms = report["algorithms"];
  if (typeof algorithms !== "object" || algorithms === null || Array.isArray(algorithms)) {
    throw new ReportError("report is missing its algorithms table");
  }
  let withComponents = 0;
  for (const [name, entry] of Object.entries(algorithms as Record<string, unknown>)) {
    if (typeof entry !== "object" || entry === null) {
      throw new ReportError(`algorithm ${name} entry is not an object`);
    }
    const components = (entry as Record<string, unknown>)["components"];
    if (components !== null && components !== undefined) {
      if (!validComponents(components)) {
        throw new ReportError(`algorithm ${name} has malformed component indices`);
      }
      withComponents += 1;
    }
  }
  if (withComponents === 0) {
    throw new ReportError("report has no component indices to explore");
  }
  const importance = report["importance"] as ReportFile["importance"] | undefined;
  if (!importance || typeof importance !== "object" || !importance.levels) {
    throw new ReportError("report is missing its importance vector");
  }
  return report as unknown as ReportFile;
}

export interface Scored {
  scores: Record<string, number>;
  bands: Record<string, Band>;
  ranking: string[];
}

/** Recompute scores, bands, and the ranking; never mutates the report. */
export function rescore(report: ReportFile, importance: ImportanceLevels): Scored {
  const scores: Record<string, number> = {};
  const bands: Record<string, Band> = {};
  for (const [name, entry] of Object.entries(report.algorithms)) {
    if (!entry.components || !entry.completed) continue;
    const score = composeHem(entry.components, importance);
    scores[name] = score;
    bands[name] = band(score);
  }
  return { scores, bands, ranking: rank(scores) };
}
