/** Data contracts shared with the CLI: pair dossiers in, review decisions out. */

export interface FiveNumber {
  min: number;
  q1: number;
  median: number;
  q3: number;
  max: number;
}

export interface EnergyProfile {
  t: number[];
  energy: number[];
  peaks: number[];
}

export interface WaveletMatch {
  matched: boolean;
  count: number;
  pairs?: [number, number][];
}

export interface DossierSeries {
  t: number[];
  gap_long: number[];
  gap_lat: number[];
  rel_vel: number[];
  sv_speed: number[];
  lv_speed: number[];
  sv_accel: number[];
  lv_x: number[];
  sv_x: number[];
  lv_y: number[];
  sv_y: number[];
  lv_lat_speed: number[];
  sv_lat_speed: number[];
}

export const SERIES_KEYS: (keyof DossierSeries)[] = [
  "t", "gap_long", "gap_lat", "rel_vel", "sv_speed", "lv_speed", "sv_accel",
  "lv_x", "sv_x", "lv_y", "sv_y", "lv_lat_speed", "sv_lat_speed",
];

export interface TrailEvent {
  stage: number;
  name: string;
  action: "trimmed" | "removed" | "retained";
  detail?: string;
}

export interface Verdict {
  final: "retained" | "removed";
  stage?: number | null;
  reason?: string | null;
}

export interface FlagEntry {
  t: number;
  reasons: string[];
}

export interface DossierDerived {
  reference_speed: number;
  oblique_lv: number[];
  oblique_sv: number[];
  energy_lv?: EnergyProfile | null;
  energy_sv?: EnergyProfile | null;
  wavelet_match?: WaveletMatch | null;
}

export interface PairDossier {
  pair_id: string;
  category: string;
  lv_id: string;
  sv_id: string;
  window: [number, number];
  n_samples?: number;
  flag_count?: number;
  verdict: Verdict;
  trail?: TrailEvent[];
  series: DossierSeries;
  derived: DossierDerived;
  summaries: Record<string, FiveNumber>;
  flags: FlagEntry[];
}

export type ReviewAction = "keep" | "remove" | "trim";

export interface ReviewDecision {
  pair_id: string;
  action: ReviewAction;
  trim_windows?: [number, number][];
  note?: string;
}

export type TrimWindow = [number, number];

export interface DecisionDraft {
  action: ReviewAction | null;
  trim_windows: TrimWindow[];
  note: string;
}

export function emptyDraft(): DecisionDraft {
  return { action: null, trim_windows: [], note: "" };
}
