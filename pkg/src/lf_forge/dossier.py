"""Pair dossiers for human review, and review-decision application.

A dossier bundles everything an analyst needs to judge one pair: the raw
interaction series, positions for trajectory and oblique plots, wavelet
energy profiles, box-plot summaries, and the pipeline's flags and verdict
trail. Decisions coming back from review (keep / remove / trim) are merged
into the retained set; trims reuse the pipeline's prefix/suffix trimming
contract including its minimum-duration floor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .filters import FilterOutcome, trim_pair
from .pairing import CandidatePair
from .trajmodel import GRID_EPS
from .wavecorr import WaveletConfig, cwt_energy


def oblique_series(positions: np.ndarray, t: np.ndarray, v0: float) -> np.ndarray:
    """Positions minus a reference-speed drift: x'(t) = x(t) - v0*(t - t0)."""
    positions = np.asarray(positions, dtype=float)
    t = np.asarray(t, dtype=float)
    if not math.isfinite(v0):
        raise ValueError(f"reference speed must be finite, got {v0}")
    return positions - v0 * (t - t[0])


def _five_number(values: np.ndarray) -> dict[str, float]:
    lo, q1, med, q3, hi = np.percentile(values, [0, 25, 50, 75, 100])
    return {"min": float(lo), "q1": float(q1), "median": float(med),
            "q3": float(q3), "max": float(hi)}


@dataclass(frozen=True)
class ReviewDecision:
    pair_id: str
    action: str  # keep | remove | trim
    trim_windows: tuple[tuple[float, float], ...] = ()
    note: str = ""

    def __post_init__(self) -> None:
        if self.action not in ("keep", "remove", "trim"):
            raise ValueError(f"unknown review action {self.action!r}")
        windows = sorted(self.trim_windows)
        for (a0, a1) in windows:
            if a1 <= a0:
                raise ValueError(f"trim window {a0}..{a1} is empty or reversed")
        for (_, prev_end), (next_start, _) in zip(windows, windows[1:]):
            if next_start < prev_end:
                raise ValueError("trim windows overlap")
        object.__setattr__(self, "trim_windows", tuple(windows))


def load_decisions(path: str | Path) -> list[ReviewDecision]:
    from .config import review_decision_schema, validate_against

    payload = json.loads(Path(path).read_text())
    validate_against(review_decision_schema(), payload)
    return [
        ReviewDecision(
            pair_id=r["pair_id"], action=r["action"],
            trim_windows=tuple(tuple(w) for w in r.get("trim_windows", [])),
            note=r.get("note", ""),
        )
        for r in payload
    ]


@dataclass
class ReviewApplication:
    retained: list[CandidatePair]
    effects: dict[str, str] = field(default_factory=dict)  # pair_id -> what happened


def apply_decisions(
    retained: Sequence[CandidatePair],
    base_pairs: Sequence[CandidatePair],
    decisions: Iterable[ReviewDecision],
    min_duration: float,
) -> ReviewApplication:
    """Merge review decisions into the pipeline's retained set.

    remove: drop the pair. trim: drop samples inside the windows (half-open
    [t0, t1)); only prefix/suffix runs actually shrink the pair, interior
    windows are retained per the trimming contract, and a too-short survivor
    removes the pair. keep: no-op for retained pairs, and resurrects the base
    pair when the pipeline had removed it (the analyst overrides the
    machine). Decisions on unknown pair ids are reported, not fatal.
    Application is commutative across disjoint pair ids.
    """
    by_id = {p.pair_id: p for p in retained}
    base_by_id = {p.pair_id: p for p in base_pairs}
    app = ReviewApplication(retained=[], effects={})
    for decision in decisions:
        pid = decision.pair_id
        pair = by_id.get(pid)
        if decision.action == "remove":
            if pair is None:
                app.effects[pid] = "remove: already absent"
            else:
                del by_id[pid]
                app.effects[pid] = "removed"
        elif decision.action == "keep":
            if pair is not None:
                app.effects[pid] = "kept"
            elif pid in base_by_id:
                by_id[pid] = base_by_id[pid]
                app.effects[pid] = "kept: restored from base set"
            else:
                app.effects[pid] = "keep: unknown pair id"
        elif decision.action == "trim":
            if pair is None:
                app.effects[pid] = "trim: pair not in retained set"
                continue
            t = pair.samples.t
            t0, t1 = pair.window
            bad = [w for w in decision.trim_windows
                   if w[0] < t0 - GRID_EPS or w[1] > t1 + pair.sv.dt + GRID_EPS]
            if bad:
                app.effects[pid] = f"trim: window {bad[0]} outside pair window"
                continue
            flagged = [
                i for i in range(len(t))
                if any(w0 - GRID_EPS <= t[i] < w1 - GRID_EPS for (w0, w1) in decision.trim_windows)
            ]
            result = trim_pair(pair, flagged, min_duration)
            if result.pair is None:
                del by_id[pid]
                app.effects[pid] = "trimmed away: below minimum duration"
            else:
                by_id[pid] = result.pair
                app.effects[pid] = (
                    f"trimmed to [{result.pair.window[0]:g}, {result.pair.window[1]:g}]"
                )
    app.retained = sorted(by_id.values(), key=lambda p: (p.sv.id, p.window[0]))
    return app


def build_dossier(
    pair: CandidatePair,
    outcome: FilterOutcome | None = None,
    wavelet_cfg: WaveletConfig | None = None,
) -> dict:
    """Self-contained JSON payload for reviewing one pair.

    Series come from the pair's base window; the pipeline outcome, when
    given, contributes the flag list and the verdict trail.
    """
    s = pair.samples
    t = s.t
    dt = pair.sv.dt
    ka = round(float(t[0]) / dt)
    kb = round(float(t[-1]) / dt)
    la, lb = ka - pair.lv.k0, kb - pair.lv.k0
    sa, sb = ka - pair.sv.k0, kb - pair.sv.k0

    v0 = float(np.mean(s.sv_speed))
    lv_x = pair.lv.x_long[la:lb + 1]
    sv_x = pair.sv.x_long[sa:sb + 1]

    energy_lv = energy_sv = None
    match = None
    if wavelet_cfg is not None:
        usable = tuple(a for a in wavelet_cfg.scales if math.ceil(2.0 * a / dt) <= len(s))
        if usable:
            from dataclasses import replace

            cfg = replace(wavelet_cfg, scales=usable)
            prof_lv = cwt_energy(s.lv_speed, dt, cfg, t0=float(t[0]))
            prof_sv = cwt_energy(s.sv_speed, dt, cfg, t0=float(t[0]))
            energy_lv = {"t": prof_lv.t.tolist(), "energy": prof_lv.energy.tolist(),
                         "peaks": list(prof_lv.peaks)}
            energy_sv = {"t": prof_sv.t.tolist(), "energy": prof_sv.energy.tolist(),
                         "peaks": list(prof_sv.peaks)}

    flags = []
    verdict: dict = {"final": "retained", "stage": None, "reason": None}
    trail: list[dict] = []
    if outcome is not None:
        for ft, reasons in sorted(outcome.flag_times.get(pair.pair_id, {}).items()):
            flags.append({"t": ft, "reasons": list(reasons)})
        removed = outcome.removed_by_pair.get(pair.pair_id)
        if removed is not None:
            verdict = {"final": "removed", "stage": removed[0], "reason": removed[1]}
        for rec in outcome.stages:
            if pair.pair_id in rec.removed:
                trail.append({"stage": rec.index, "name": rec.name, "action": "removed",
                              "detail": rec.removed[pair.pair_id]})
            elif pair.pair_id in rec.trimmed:
                w = rec.trimmed[pair.pair_id]
                trail.append({"stage": rec.index, "name": rec.name, "action": "trimmed",
                              "detail": f"window [{w[0]:g}, {w[1]:g}]"})
            else:
                trail.append({"stage": rec.index, "name": rec.name, "action": "retained"})
            if pair.pair_id in rec.removed:
                break
        wm = outcome.wavelet_results.get(pair.pair_id)
        if wm is not None:
            match = {"matched": wm.matched, "count": wm.count,
                     "pairs": [list(p) for p in wm.pairs]}

    return {
        "pair_id": pair.pair_id,
        "category": pair.category_tag,
        "lv_id": pair.lv.id,
        "sv_id": pair.sv.id,
        "window": [float(pair.window[0]), float(pair.window[1])],
        "n_samples": len(s),
        "flag_count": len(flags),
        "verdict": verdict,
        "trail": trail,
        "series": {
            "t": t.tolist(),
            "gap_long": s.gap_long.tolist(),
            "gap_lat": s.gap_lat.tolist(),
            "rel_vel": s.rel_vel.tolist(),
            "sv_speed": s.sv_speed.tolist(),
            "lv_speed": s.lv_speed.tolist(),
            "sv_accel": s.sv_accel.tolist(),
            "lv_x": lv_x.tolist(),
            "sv_x": sv_x.tolist(),
            "lv_y": pair.lv.y_lat[la:lb + 1].tolist(),
            "sv_y": pair.sv.y_lat[sa:sb + 1].tolist(),
            "lv_lat_speed": pair.lv.v_lat[la:lb + 1].tolist(),
            "sv_lat_speed": pair.sv.v_lat[sa:sb + 1].tolist(),
        },
        "derived": {
            "reference_speed": v0,
            "oblique_lv": oblique_series(lv_x, t, v0).tolist(),
            "oblique_sv": oblique_series(sv_x, t, v0).tolist(),
            "energy_lv": energy_lv,
            "energy_sv": energy_sv,
            "wavelet_match": match,
        },
        "summaries": {
            "rel_vel": _five_number(s.rel_vel),
            "gap_long": _five_number(s.gap_long),
            "sv_speed": _five_number(s.sv_speed),
            "gap_lat": _five_number(s.gap_lat),
            "sv_lat_speed": _five_number(pair.sv.v_lat[sa:sb + 1]),
        },
        "flags": flags,
    }
