import { FiveNumber, PairDossier } from "../src/types.js";

function fiveNumber(values: number[]): FiveNumber {
  const sorted = [...values].sort((a, b) => a - b);
  const at = (q: number) => {
    const pos = q * (sorted.length - 1);
    const lo = Math.floor(pos);
    const hi = Math.ceil(pos);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo);
  };
  return { min: sorted[0], q1: at(0.25), median: at(0.5), q3: at(0.75), max: sorted[sorted.length - 1] };
}

export interface FixtureOptions {
  pairId?: string;
  category?: string;
  n?: number;
  flagTimes?: number[];
  removed?: { stage: number; reason: string } | null;
  t0?: number;
}

export function makeDossier(options: FixtureOptions = {}): PairDossier {
  const n = options.n ?? 21;
  const t0 = options.t0 ?? 0;
  const dt = 0.5;
  const t = Array.from({ length: n }, (_, i) => t0 + i * dt);
  const gap_long = t.map((ti) => 14 + 2 * Math.sin(ti / 3));
  const rel_vel = t.map((ti) => 0.7 * Math.cos(ti / 3));
  const sv_speed = t.map((ti) => 8 + 0.5 * Math.sin(ti / 4));
  const lv_speed = sv_speed.map((v, i) => v + rel_vel[i]);
  const sv_x = t.map((ti) => 8 * (ti - t0));
  const lv_x = sv_x.map((x, i) => x + gap_long[i] + 4.0);
  const gap_lat = t.map((ti) => 0.3 * Math.sin(ti / 5));
  const zeros = t.map(() => 0);
  const flags = (options.flagTimes ?? []).map((ft) => ({ t: ft, reasons: ["REL_VEL_EXCESS"] }));
  const v0 = sv_speed.reduce((a, b) => a + b, 0) / n;
  return {
    pair_id: options.pairId ?? "LV-SV-0.0",
    category: options.category ?? "CAR-CAR",
    lv_id: "LV",
    sv_id: "SV",
    window: [t[0], t[n - 1]],
    n_samples: n,
    flag_count: flags.length,
    verdict: options.removed
      ? { final: "removed", stage: options.removed.stage, reason: options.removed.reason }
      : { final: "retained", stage: null, reason: null },
    trail: [],
    series: {
      t, gap_long, gap_lat, rel_vel, sv_speed, lv_speed,
      sv_accel: zeros, lv_x, sv_x,
      lv_y: zeros, sv_y: gap_lat,
      lv_lat_speed: zeros, sv_lat_speed: gap_lat.map((g, i) => (i > 0 ? (g - gap_lat[i - 1]) / dt : 0)),
    },
    derived: {
      reference_speed: v0,
      oblique_lv: lv_x.map((x, i) => x - v0 * (t[i] - t[0])),
      oblique_sv: sv_x.map((x, i) => x - v0 * (t[i] - t[0])),
      energy_lv: null,
      energy_sv: null,
      wavelet_match: null,
    },
    summaries: {
      rel_vel: fiveNumber(rel_vel),
      gap_long: fiveNumber(gap_long),
      sv_speed: fiveNumber(sv_speed),
      gap_lat: fiveNumber(gap_lat),
      sv_lat_speed: fiveNumber(gap_lat),
    },
    flags,
  };
}

export class FakeStorage {
  private data = new Map<string, string>();

  getItem(key: string): string | null {
    return this.data.get(key) ?? null;
  }

  setItem(key: string, value: string): void {
    this.data.set(key, value);
  }
}
