/** Structural validation of incoming dossier JSON.
 *
 * Mirrors the published pair-dossier schema closely enough to reject files
 * the charts cannot render; every problem is reported with a path so a bad
 * file in a batch is listed, not fatal.
 */

import { PairDossier, SERIES_KEYS } from "./types.js";

const SUMMARY_KEYS = ["rel_vel", "gap_long", "sv_speed", "gap_lat", "sv_lat_speed"];
const FIVE_NUMBER_KEYS = ["min", "q1", "median", "q3", "max"];

function isRecord(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

function isNumberArray(v: unknown): v is number[] {
  return Array.isArray(v) && v.every((x) => typeof x === "number" && Number.isFinite(x));
}

export function validateDossier(payload: unknown): string[] {
  const errors: string[] = [];
  if (!isRecord(payload)) {
    return ["payload is not an object"];
  }
  for (const key of ["pair_id", "category", "lv_id", "sv_id"]) {
    if (typeof payload[key] !== "string" || payload[key] === "") {
      errors.push(`${key}: missing or not a string`);
    }
  }
  const window = payload["window"];
  if (!isNumberArray(window) || window.length !== 2) {
    errors.push("window: expected [t0, t1]");
  } else if (window[1] <= window[0]) {
    errors.push("window: t1 must exceed t0");
  }

  const verdict = payload["verdict"];
  if (!isRecord(verdict) || (verdict["final"] !== "retained" && verdict["final"] !== "removed")) {
    errors.push("verdict.final: expected 'retained' or 'removed'");
  }

  const series = payload["series"];
  if (!isRecord(series)) {
    errors.push("series: missing");
  } else {
    const t = series["t"];
    const n = isNumberArray(t) ? t.length : -1;
    if (n < 1) {
      errors.push("series.t: expected a non-empty number array");
    }
    for (const key of SERIES_KEYS) {
      const arr = series[key];
      if (!isNumberArray(arr)) {
        errors.push(`series.${key}: expected a number array`);
      } else if (n >= 0 && arr.length !== n) {
        errors.push(`series.${key}: length ${arr.length} != ${n}`);
      }
    }
  }

  const derived = payload["derived"];
  if (!isRecord(derived)) {
    errors.push("derived: missing");
  } else {
    if (typeof derived["reference_speed"] !== "number") {
      errors.push("derived.reference_speed: expected a number");
    }
    for (const key of ["oblique_lv", "oblique_sv"]) {
      if (!isNumberArray(derived[key])) {
        errors.push(`derived.${key}: expected a number array`);
      }
    }
  }

  const summaries = payload["summaries"];
  if (!isRecord(summaries)) {
    errors.push("summaries: missing");
  } else {
    for (const key of SUMMARY_KEYS) {
      const box = summaries[key];
      if (!isRecord(box) || FIVE_NUMBER_KEYS.some((f) => typeof box[f] !== "number")) {
        errors.push(`summaries.${key}: expected {min, q1, median, q3, max}`);
      }
    }
  }

  const flags = payload["flags"];
  if (!Array.isArray(flags)) {
    errors.push("flags: expected an array");
  } else {
    flags.forEach((entry, i) => {
      if (!isRecord(entry) || typeof entry["t"] !== "number" || !Array.isArray(entry["reasons"])) {
        errors.push(`flags[${i}]: expected {t, reasons}`);
      }
    });
  }
  return errors;
}

export function parseDossier(text: string): { dossier: PairDossier | null; errors: string[] } {
  let payload: unknown;
  try {
    payload = JSON.parse(text);
  } catch (exc) {
    return { dossier: null, errors: [`invalid JSON: ${(exc as Error).message}`] };
  }
  const errors = validateDossier(payload);
  if (errors.length > 0) {
    return { dossier: null, errors };
  }
  return { dossier: payload as unknown as PairDossier, errors: [] };
}
