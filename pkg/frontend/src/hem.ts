/**
 * Holistic score composition, banding, and ranking.
 *
 * This mirrors the core toolkit's scoring exactly (same component order,
 * same weight normalization, same tie-break), which the fixture-based
 * conformance tests enforce to 1e-9.
 */

export interface ComponentIndices {
  accuracy: number;
  convergence: number;
  comp_efficiency: number;
  fairness: number;
  personalization: number | null;
}

export interface ImportanceLevels {
  accuracy: number;
  convergence: number;
  comp_efficiency: number;
  fairness: number;
  personalization: number;
}

export const CORE_COMPONENTS = [
  "accuracy",
  "convergence",
  "comp_efficiency",
  "fairness",
] as const;

export const LOW = 1;
export const MODERATE = 2;
export const HIGH = 3;

export const USE_CASE_PRESETS: Record<string, ImportanceLevels> = {
  iot: { accuracy: HIGH, convergence: LOW, comp_efficiency: HIGH, fairness: HIGH, personalization: MODERATE },
  smartphone: { accuracy: MODERATE, convergence: HIGH, comp_efficiency: HIGH, fairness: MODERATE, personalization: MODERATE },
  institution: { accuracy: HIGH, convergence: LOW, comp_efficiency: LOW, fairness: HIGH, personalization: MODERATE },
};

export const BANDS = ["Excellent", "Good", "Acceptable", "Low"] as const;
export type Band = (typeof BANDS)[number];

export function composeHem(indices: ComponentIndices, importance: ImportanceLevels): number {
  const pairs: Array<[number, number]> = [];
  for (const component of CORE_COMPONENTS) {
    const level = importance[component];
    if (level < 0 || !Number.isFinite(level)) {
      throw new Error(`importance level for ${component} must be a non-negative number`);
    }
    if (level > 0) {
      const value = indices[component];
      if (value === null || value === undefined) {
        throw new Error(`missing index for weighted component ${component}`);
      }
      pairs.push([value, level]);
    }
  }
  if (indices.personalization !== null && indices.personalization !== undefined
      && importance.personalization > 0) {
    pairs.push([indices.personalization, importance.personalization]);
  }
  let totalWeight = 0;
  for (const [, level] of pairs) totalWeight += level;
  if (totalWeight <= 0) {
    throw new Error("all applicable importance levels are zero");
  }
  let weighted = 0;
  for (const [value, level] of pairs) weighted += value * level;
  return weighted / totalWeight;
}

export function band(score: number): Band {
  if (!(score >= 0 && score <= 1)) {
    throw new Error(`holistic score ${score} outside [0, 1]`);
  }
  if (score > 0.8) return "Excellent";
  if (score >= 0.7) return "Good";
  if (score >= 0.5) return "Acceptable";
  return "Low";
}

export function rank(scores: Record<string, number>): string[] {
  const names = Object.keys(scores);
  if (names.length === 0) throw new Error("scores must be nonempty");
  return names.sort((a, b) => {
    const d = (scores[b] as number) - (scores[a] as number);
    if (d !== 0) return d;
    return a < b ? -1 : a > b ? 1 : 0;
  });
}

export function allZero(importance: ImportanceLevels): boolean {
  return (
    importance.accuracy === 0 &&
    importance.convergence === 0 &&
    importance.comp_efficiency === 0 &&
    importance.fairness === 0 &&
    importance.personalization === 0
  );
}
