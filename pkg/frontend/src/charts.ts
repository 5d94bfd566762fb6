/** Chart models for the seven inspection figures.
 *
 * Builders are pure: they only reorganize dossier series values (never
 * transform them) into point lists with sample indices, so hover linking
 * and the rendering layer can stay dumb. Draft trim windows mark the
 * samples they cover; flags mark the samples the pipeline flagged.
 */

import { DecisionDraft, FiveNumber, PairDossier, TrimWindow } from "./types.js";

export interface Pt {
  x: number;
  y: number;
  i: number; // sample index, shared across all charts of the pair
}

export interface SeriesModel {
  label: string;
  cls: string;
  points: Pt[];
  draw: "line" | "points" | "line+points";
}

export interface BoxModel {
  label: string;
  stats: FiveNumber;
}

export interface ChartPanel {
  xLabel: string;
  yLabel: string;
  series: SeriesModel[];
  numbered?: boolean;
  boxes?: BoxModel[];
  /** Sample indices flagged by the pipeline. */
  flagged: number[];
  /** Sample indices inside draft trim windows (rendered dimmed). */
  trimmed: number[];
}

export type ChartKind =
  | "trajectories"
  | "scatter"
  | "hysteresis"
  | "oblique"
  | "lat-gap-speed"
  | "lateral-series"
  | "boxplots";

export const CHART_KINDS: ChartKind[] = [
  "trajectories", "scatter", "hysteresis", "oblique",
  "lat-gap-speed", "lateral-series", "boxplots",
];

export interface ChartFigure {
  kind: ChartKind;
  title: string;
  panels: ChartPanel[];
}

function zip(xs: number[], ys: number[]): Pt[] {
  return xs.map((x, i) => ({ x, y: ys[i], i }));
}

/** Index of the grid sample closest to a time value. */
export function nearestIndex(t: number[], time: number): number {
  if (t.length === 0) return -1;
  let best = 0;
  let dist = Math.abs(t[0] - time);
  for (let i = 1; i < t.length; i++) {
    const d = Math.abs(t[i] - time);
    if (d < dist) {
      best = i;
      dist = d;
    }
  }
  return best;
}

export function flaggedIndices(d: PairDossier): number[] {
  const t = d.series.t;
  const dt = t.length > 1 ? t[1] - t[0] : 1.0;
  const out = new Set<number>();
  for (const entry of d.flags) {
    const i = nearestIndex(t, entry.t);
    if (i >= 0 && Math.abs(t[i] - entry.t) <= dt / 2) {
      out.add(i);
    }
  }
  return [...out].sort((a, b) => a - b);
}

/** Samples covered by the draft's half-open [t0, t1) trim windows. */
export function trimmedIndices(d: PairDossier, windows: TrimWindow[]): number[] {
  const out: number[] = [];
  d.series.t.forEach((time, i) => {
    if (windows.some(([w0, w1]) => time >= w0 && time < w1)) {
      out.push(i);
    }
  });
  return out;
}

export function buildCharts(d: PairDossier, draft: DecisionDraft): ChartFigure[] {
  const s = d.series;
  const flagged = flaggedIndices(d);
  const trimmed = trimmedIndices(d, draft.trim_windows);
  const panel = (p: Omit<ChartPanel, "flagged" | "trimmed">): ChartPanel => ({
    ...p, flagged, trimmed,
  });

  return [
    {
      kind: "trajectories",
      title: "Longitudinal and lateral trajectories vs time",
      panels: [
        panel({
          xLabel: "t (s)", yLabel: "longitudinal position (m)",
          series: [
            { label: "LV", cls: "lv", points: zip(s.t, s.lv_x), draw: "line" },
            { label: "SV", cls: "sv", points: zip(s.t, s.sv_x), draw: "line" },
          ],
        }),
        panel({
          xLabel: "t (s)", yLabel: "lateral position (m)",
          series: [
            { label: "LV", cls: "lv", points: zip(s.t, s.lv_y), draw: "line" },
            { label: "SV", cls: "sv", points: zip(s.t, s.sv_y), draw: "line" },
          ],
        }),
      ],
    },
    {
      kind: "scatter",
      title: "Speed vs longitudinal gap (numbered)",
      panels: [
        panel({
          xLabel: "longitudinal gap (m)", yLabel: "SV speed (m/s)",
          numbered: true,
          series: [{ label: "samples", cls: "sv", points: zip(s.gap_long, s.sv_speed), draw: "points" }],
        }),
      ],
    },
    {
      kind: "hysteresis",
      title: "Hysteresis: relative velocity vs longitudinal gap",
      panels: [
        panel({
          xLabel: "longitudinal gap (m)", yLabel: "relative velocity (m/s)",
          series: [{ label: "path", cls: "sv", points: zip(s.gap_long, s.rel_vel), draw: "line+points" }],
        }),
      ],
    },
    {
      kind: "oblique",
      title: "Oblique longitudinal positions vs time",
      panels: [
        panel({
          xLabel: "t (s)", yLabel: `position - ${fmt(d.derived.reference_speed)} m/s drift (m)`,
          series: [
            { label: "LV", cls: "lv", points: zip(s.t, d.derived.oblique_lv), draw: "line" },
            { label: "SV", cls: "sv", points: zip(s.t, d.derived.oblique_sv), draw: "line" },
          ],
        }),
      ],
    },
    {
      kind: "lat-gap-speed",
      title: "Lateral gap vs lateral speed",
      panels: [
        panel({
          xLabel: "lateral gap (m)", yLabel: "SV lateral speed (m/s)",
          series: [{ label: "path", cls: "sv", points: zip(s.gap_lat, s.sv_lat_speed), draw: "line+points" }],
        }),
      ],
    },
    {
      kind: "lateral-series",
      title: "Lateral gap and lateral speed vs time",
      panels: [
        panel({
          xLabel: "t (s)", yLabel: "lateral gap (m)",
          series: [{ label: "gap", cls: "sv", points: zip(s.t, s.gap_lat), draw: "line" }],
        }),
        panel({
          xLabel: "t (s)", yLabel: "SV lateral speed (m/s)",
          series: [{ label: "speed", cls: "sv", points: zip(s.t, s.sv_lat_speed), draw: "line" }],
        }),
      ],
    },
    {
      kind: "boxplots",
      title: "Box plots",
      panels: [
        panel({
          xLabel: "", yLabel: "",
          series: [],
          boxes: [
            { label: "rel vel (m/s)", stats: d.summaries.rel_vel },
            { label: "long gap (m)", stats: d.summaries.gap_long },
            { label: "SV speed (m/s)", stats: d.summaries.sv_speed },
            { label: "lat gap (m)", stats: d.summaries.gap_lat },
            { label: "lat speed (m/s)", stats: d.summaries.sv_lat_speed },
          ],
        }),
      ],
    },
  ];
}

export function fmt(x: number): string {
  return Number.isInteger(x) ? String(x) : x.toPrecision(4);
}
