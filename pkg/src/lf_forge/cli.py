"""Command-line orchestration: subcommands, artifacts, manifests.

Every subcommand reads one JSON config (see docs/runconfig.schema.json),
writes flat CSV/JSON artifacts into the output directory, and finishes with
a manifest recording the config hash, seed, and artifact names. Writes are
atomic (temp file + rename) and contain no timestamps, so a rerun with the
same config and seed reproduces byte-identical artifacts.

Exit codes: 0 success, 2 invalid configuration (the offending field path is
printed), 3 missing input artifact.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import evalmod, fdgap, filters, synthgen
from .config import (
    ConfigValidationError,
    RunConfig,
    load_config,
)
from .dossier import apply_decisions, build_dossier, load_decisions
from .filters import FilterOutcome
from .pairing import CandidatePair, extract_pairs, summarize_pairs
from .trajmodel import CLASS_ORDER, ConfigError, IngestResult, Vehicle, ingest

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING_INPUT = 3


class MissingInputError(FileNotFoundError):
    pass


def fmt(value) -> str:
    """CSV cell formatting: 6 significant digits, empty for missing."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if np.isnan(value):
            return ""
        return format(float(value), ".6g")
    return str(value)


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    import io

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(cell) for cell in row])
    atomic_write_text(path, buffer.getvalue())


def write_json(path: Path, payload) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_manifest(out: Path, subcommand: str, cfg: RunConfig, seed: int, artifacts: list[str]) -> None:
    write_json(out / "manifest.json", {
        "subcommand": subcommand,
        "config_hash": cfg.hash(),
        "seed": seed,
        "preset": cfg.preset,
        "artifacts": sorted(artifacts),
    })


# ---------------------------------------------------------------------------
# Shared pipeline plumbing
# ---------------------------------------------------------------------------


def _load_vehicles(cfg: RunConfig) -> IngestResult:
    if not cfg.input:
        raise MissingInputError("config has no 'input' trajectory CSV")
    path = Path(cfg.input)
    if not path.exists():
        raise MissingInputError(f"input CSV not found: {path}")
    return ingest(str(path), cfg.mapping, cfg.dt, class_dims=cfg.class_dims)

def _base_pairs(cfg: RunConfig, vehicles: list[Vehicle]) -> list[CandidatePair]:
    return extract_pairs(vehicles, cfg.pairing, cfg.dt)


def _run_filter(cfg: RunConfig, pairs: list[CandidatePair], preset: str | None = None) -> FilterOutcome:
    return filters.run_pipeline(
        pairs, preset or cfg.preset, cfg.thresholds, cfg.fd_params, cfg.wavelet,
        min_duration=cfg.pairing.min_duration,
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_synth(cfg: RunConfig, out: Path, args) -> list[str]:
    seed = args.seed if args.seed is not None else cfg.synth.seed
    suite = synthgen.gen_suite(cfg.synth.counts, seed=seed)
    synthgen.write_suite_csv(out / "synth_trajectories.csv", suite.vehicles)
    synthgen.write_labels(out / "synth_labels.json", suite.truth)
    return ["synth_trajectories.csv", "synth_labels.json"]


def cmd_ingest(cfg: RunConfig, out: Path, args) -> list[str]:
    result = _load_vehicles(cfg)
    synthgen.write_suite_csv(out / "vehicles_normalized.csv", result.vehicles)
    write_json(out / "ingest_report.json", {
        "n_vehicles": len(result.vehicles),
        "record_errors": [{"row": r, "message": m} for r, m in result.record_errors],
        "vehicle_errors": [{"vehicle": v, "message": m} for v, m in result.vehicle_errors],
    })
    return ["vehicles_normalized.csv", "ingest_report.json"]


def cmd_thresholds(cfg: RunConfig, out: Path, args) -> list[str]:
    speeds = [float(v) for v in range(5, 70, 5)]
    table = fdgap.gap_threshold_table(cfg.fd_params, speeds)
    header = ["speed_kmh"] + [c.value for c in table.classes]
    rows = [[speed] + list(gaps) for speed, gaps in zip(table.speeds, table.gaps)]
    write_csv(out / "gap_table.csv", header, rows)
    return ["gap_table.csv"]


def cmd_pairs(cfg: RunConfig, out: Path, args) -> list[str]:
    vehicles = _load_vehicles(cfg).vehicles
    pairs = _base_pairs(cfg, vehicles)
    write_csv(
        out / "pair_index.csv",
        ["pair_id", "lv_id", "sv_id", "category", "t0", "t1", "n_samples"],
        [[p.pair_id, p.lv.id, p.sv.id, p.category_tag,
          p.window[0], p.window[1], len(p.samples)] for p in pairs],
    )
    summary = summarize_pairs(pairs, min_pairs=cfg.eval.min_pairs)
    write_csv(
        out / "pair_summary.csv",
        ["category", "lv_class", "sv_class", "n_pairs", "n_points", "asymmetry", "modelable"],
        [[c.tag, c.lv_class.value, c.sv_class.value, c.n_pairs, c.n_points,
          c.asymmetry.value, c.modelable] for c in summary.categories],
    )
    return ["pair_index.csv", "pair_summary.csv"]


def _ledger_payload(outcome: FilterOutcome) -> dict:
    return {
        "preset": outcome.preset,
        "base_pairs": outcome.base_pairs,
        "base_points": outcome.base_points,
        "stages": [
            {
                "index": rec.index,
                "name": rec.name,
                "pairs_in": rec.pairs_in,
                "pairs_out": rec.pairs_out,
                "points_in": rec.points_in,
                "points_out": rec.points_out,
                "removed": dict(sorted(rec.removed.items())),
                "trimmed": {pid: list(w) for pid, w in sorted(rec.trimmed.items())},
            }
            for rec in outcome.stages
        ],
        "retained": [p.pair_id for p in outcome.retained],
        "retained_windows": {p.pair_id: [p.window[0], p.window[1]] for p in outcome.retained},
        "flags": {
            pid: [{"t": t, "reasons": list(reasons)} for t, reasons in sorted(times.items())]
            for pid, times in sorted(outcome.flag_times.items())
        },
        "wavelet": {
            pid: {"matched": m.matched, "count": m.count, "pairs": [list(x) for x in m.pairs]}
            for pid, m in sorted(outcome.wavelet_results.items())
        },
    }


def _write_filter_artifacts(out: Path, outcome: FilterOutcome) -> list[str]:
    write_json(out / "filter_ledger.json", _ledger_payload(outcome))
    write_csv(
        out / "stage_summary.csv",
        ["stage", "name", "pairs_in", "pairs_out", "points_in", "points_out",
         "pairs_removed", "points_removed"],
        [[rec.index, rec.name, rec.pairs_in, rec.pairs_out, rec.points_in, rec.points_out,
          rec.pairs_in - rec.pairs_out, rec.points_in - rec.points_out]
         for rec in outcome.stages],
    )
    return ["filter_ledger.json", "stage_summary.csv"]


def cmd_filter(cfg: RunConfig, out: Path, args) -> list[str]:
    vehicles = _load_vehicles(cfg).vehicles
    pairs = _base_pairs(cfg, vehicles)
    outcome = _run_filter(cfg, pairs, args.preset)
    return _write_filter_artifacts(out, outcome)


def cmd_wavelet(cfg: RunConfig, out: Path, args) -> list[str]:
    import math

    from .wavecorr import cwt_energy, peak_match

    vehicles = _load_vehicles(cfg).vehicles
    pairs = _base_pairs(cfg, vehicles)
    payload = {}
    for pair in pairs:
        dt = pair.sv.dt
        usable = tuple(a for a in cfg.wavelet.scales if math.ceil(2.0 * a / dt) <= len(pair.samples))
        if not usable:
            payload[pair.pair_id] = {"error": "series shorter than the smallest scale support"}
            continue
        wcfg = replace(cfg.wavelet, scales=usable)
        t0 = float(pair.samples.t[0])
        lv = cwt_energy(pair.samples.lv_speed, dt, wcfg, t0=t0)
        sv = cwt_energy(pair.samples.sv_speed, dt, wcfg, t0=t0)
        match = peak_match(lv, sv, wcfg)
        payload[pair.pair_id] = {
            "matched": match.matched,
            "count": match.count,
            "pairs": [list(p) for p in match.pairs],
            "lv": {"t": lv.t.tolist(), "energy": lv.energy.tolist(), "peaks": list(lv.peaks)},
            "sv": {"t": sv.t.tolist(), "energy": sv.energy.tolist(), "peaks": list(sv.peaks)},
        }
    write_json(out / "wavelet_matches.json", payload)
    return ["wavelet_matches.json"]


def _format_p(p: float) -> float:
    """Table-style p-value: 4 decimals, tiny values printed as 0."""
    if p < 5e-5:
        return 0.0
    return round(p, 4)


def _eval_category(
    dataset_before: evalmod.RegressionDataset,
    dataset_after: evalmod.RegressionDataset | None,
    k: int,
    seed: int,
) -> dict:
    out: dict = {}
    out["before"] = evalmod.kfold_eval(dataset_before, k=k, seed=seed)
    if dataset_after is not None and len(set(dataset_after.unique_pairs())) >= k:
        out["after"] = evalmod.kfold_eval(dataset_after, k=k, seed=seed)
    return out


def _eval_artifacts(cfg: RunConfig, out: Path, pairs: list[CandidatePair],
                    outcome: FilterOutcome, seed: int) -> list[str]:
    k = cfg.eval.k
    tau = cfg.eval.tau
    by_cat_before: dict[str, list[CandidatePair]] = {}
    for p in pairs:
        by_cat_before.setdefault(p.category_tag, []).append(p)
    by_cat_after: dict[str, list[CandidatePair]] = {}
    for p in outcome.retained:
        by_cat_after.setdefault(p.category_tag, []).append(p)

    metric_rows = []
    improvement_rows = []
    coef_rows = []
    weight_rows = []
    for tag in sorted(by_cat_before):
        base = by_cat_before[tag]
        if len(base) < max(k, cfg.eval.min_pairs):
            continue
        ds_before = evalmod.build_dataset(base, tau=tau)
        retained = by_cat_after.get(tag, [])
        ds_after = evalmod.build_dataset(retained, tau=tau) if retained else None
        reports = _eval_category(ds_before, ds_after if ds_after is not None and len(ds_after) else None, k, seed)

        for phase, report in reports.items():
            n_pairs = len(base) if phase == "before" else len(retained)
            for sample, m in (("train", report.mean_train), ("test", report.mean_test)):
                metric_rows.append([tag, phase, sample, n_pairs, m.n,
                                    m.r2, m.adj_r2, m.mae, m.rmse, m.nrmse])
            for rank in ("best", "worst"):
                fold = report.best_by_r2 if rank == "best" else report.worst_by_r2
                fit = fold.fit
                coef_rows.append([
                    tag, phase, rank, fold.fold,
                    fold.test.r2, fold.test.adj_r2, fold.test.mae, fold.test.rmse, fold.test.nrmse,
                    *fit.beta,
                    *(_format_p(p) for p in fit.p_values),
                ])

        if "after" in reports:
            removed_points = outcome.base_points and (
                sum(len(p.samples) for p in base) - sum(len(p.samples) for p in retained)
            )
            removed_fraction = removed_points / sum(len(p.samples) for p in base)
            for sample in ("train", "test"):
                before_m = getattr(reports["before"], f"mean_{sample}")
                after_m = getattr(reports["after"], f"mean_{sample}")
                rows = evalmod.improvement_report(before_m, after_m, removed_fraction)
                improvement_rows.append([
                    tag, sample,
                    *(rows[name].delta_pct for name in evalmod.Metrics.METRIC_FIELDS),
                    rows["outliers_removed_pct"],
                ])

        # Weight diagnostics: base-fit weights split into retained/removed rows.
        if len(ds_before) > 4:
            fit = evalmod.fit_ols(ds_before)
            weights = evalmod.wlr_weights(fit.residuals)
            retained_keys = set()
            for p in retained:
                for t in p.samples.t:
                    retained_keys.add((p.pair_id, round(float(t), 6)))
            mask = np.array([
                (pid, round(float(t), 6)) in retained_keys
                for pid, t in zip(ds_before.pair_ids, ds_before.t)
            ])
            for subset, sel in (("retained", mask), ("removed", ~mask)):
                for bin_label, count in evalmod.weight_histogram(weights[sel]):
                    weight_rows.append([tag, subset, bin_label, count])

    write_csv(out / "metrics.csv",
              ["category", "phase", "sample", "n_pairs", "n_rows",
               "r2", "adj_r2", "mae", "rmse", "nrmse"], metric_rows)
    write_csv(out / "improvement.csv",
              ["category", "sample", "r2_pct", "adj_r2_pct", "mae_pct",
               "rmse_pct", "nrmse_pct", "outliers_removed_pct"], improvement_rows)
    write_csv(out / "coefficients.csv",
              ["category", "phase", "fold_rank", "fold",
               "r2", "adj_r2", "mae", "rmse", "nrmse",
               "beta_intercept", "beta_rel_vel", "beta_gap", "beta_speed",
               "p_intercept", "p_rel_vel", "p_gap", "p_speed"], coef_rows)
    write_csv(out / "weight_histogram.csv",
              ["category", "subset", "bin", "count"], weight_rows)
    return ["metrics.csv", "improvement.csv", "coefficients.csv", "weight_histogram.csv"]


def cmd_eval(cfg: RunConfig, out: Path, args) -> list[str]:
    seed = args.seed if args.seed is not None else cfg.eval.seed
    vehicles = _load_vehicles(cfg).vehicles
    pairs = _base_pairs(cfg, vehicles)
    outcome = _run_filter(cfg, pairs, args.preset)
    if args.decisions:
        decisions = _load_decisions_checked(args.decisions)
        application = apply_decisions(outcome.retained, pairs, decisions, cfg.pairing.min_duration)
        outcome.retained = application.retained
    return _eval_artifacts(cfg, out, pairs, outcome, seed)


def cmd_dossier(cfg: RunConfig, out: Path, args) -> list[str]:
    vehicles = _load_vehicles(cfg).vehicles
    pairs = _base_pairs(cfg, vehicles)
    outcome = _run_filter(cfg, pairs, args.preset)
    flagged = set(outcome.flag_times) | set(outcome.removed_by_pair)
    selected = pairs if args.all else [p for p in pairs if p.pair_id in flagged]
    artifacts = []
    for pair in selected:
        payload = build_dossier(pair, outcome, cfg.wavelet)
        name = f"dossiers/{pair.pair_id}.json"
        write_json(out / name, payload)
        artifacts.append(name)
    write_json(out / "dossier_index.json", {
        "count": len(artifacts),
        "pair_ids": sorted(p.pair_id for p in selected),
    })
    artifacts.append("dossier_index.json")
    return artifacts


def _load_decisions_checked(path: str):
    p = Path(path)
    if not p.exists():
        raise MissingInputError(f"decisions file not found: {p}")
    return load_decisions(p)


def cmd_review(cfg: RunConfig, out: Path, args) -> list[str]:
    if args.action != "apply":
        raise ConfigError(f"unknown review action {args.action!r}")
    decisions = _load_decisions_checked(args.decisions)
    seed = args.seed if args.seed is not None else cfg.eval.seed
    vehicles = _load_vehicles(cfg).vehicles
    pairs = _base_pairs(cfg, vehicles)
    outcome = _run_filter(cfg, pairs, args.preset)
    application = apply_decisions(outcome.retained, pairs, decisions, cfg.pairing.min_duration)
    write_json(out / "review_ledger.json", {
        "decisions": [
            {"pair_id": d.pair_id, "action": d.action,
             "trim_windows": [list(w) for w in d.trim_windows], "note": d.note}
            for d in decisions
        ],
        "effects": dict(sorted(application.effects.items())),
        "retained": [p.pair_id for p in application.retained],
    })
    write_csv(
        out / "retained_pairs.csv",
        ["pair_id", "lv_id", "sv_id", "category", "t0", "t1", "n_samples"],
        [[p.pair_id, p.lv.id, p.sv.id, p.category_tag,
          p.window[0], p.window[1], len(p.samples)] for p in application.retained],
    )
    outcome.retained = application.retained
    artifacts = ["review_ledger.json", "retained_pairs.csv"]
    artifacts += _eval_artifacts(cfg, out, pairs, outcome, seed)
    return artifacts


def cmd_report(cfg: RunConfig, out: Path, args) -> list[str]:
    seed = args.seed if args.seed is not None else cfg.eval.seed
    vehicles = _load_vehicles(cfg).vehicles
    pairs = _base_pairs(cfg, vehicles)
    summary = summarize_pairs(pairs, min_pairs=cfg.eval.min_pairs)
    outcome = _run_filter(cfg, pairs, args.preset)
    artifacts = ["pair_summary.csv"]
    write_csv(
        out / "pair_summary.csv",
        ["category", "lv_class", "sv_class", "n_pairs", "n_points", "asymmetry", "modelable"],
        [[c.tag, c.lv_class.value, c.sv_class.value, c.n_pairs, c.n_points,
          c.asymmetry.value, c.modelable] for c in summary.categories],
    )
    artifacts += _write_filter_artifacts(out, outcome)
    artifacts += _eval_artifacts(cfg, out, pairs, outcome, seed)

    lines = [
        "# Pair filtering report",
        "",
        f"- vehicles: {len(vehicles)}",
        f"- base pairs: {len(pairs)} ({len(summary.modelable)} modelable categories)",
        f"- preset: {args.preset or cfg.preset}",
        "",
        "## Stage ledger",
        "",
        "| stage | name | pairs in | pairs out | points in | points out |",
        "| --- | --- | --- | --- | --- | --- |",
    ]
    for rec in outcome.stages:
        lines.append(f"| {rec.index} | {rec.name} | {rec.pairs_in} | {rec.pairs_out} "
                     f"| {rec.points_in} | {rec.points_out} |")
    lines += [
        "",
        "## Artifacts",
        "",
    ]
    for name in sorted(artifacts):
        lines.append(f"- [{name}]({name})")
    lines.append("")
    atomic_write_text(out / "report.md", "\n".join(lines))
    artifacts.append("report.md")
    return artifacts


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "thresholds": cmd_thresholds,
    "pairs": cmd_pairs,
    "filter": cmd_filter,
    "wavelet": cmd_wavelet,
    "eval": cmd_eval,
    "dossier": cmd_dossier,
    "review": cmd_review,
    "report": cmd_report,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lf-forge",
        description="Leader-follower pair identification and filtering toolkit",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "review":
            p.add_argument("action", choices=["apply"])
            p.add_argument("--decisions", required=True, help="ReviewDecision JSON file")
        if name == "eval":
            p.add_argument("--decisions", help="optional ReviewDecision JSON to apply first")
        p.add_argument("--config", required=True, help="RunConfig JSON file")
        p.add_argument("--preset", default=None, help="filter preset (default from config)")
        p.add_argument("--out", default=None, help="output directory (default from config)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--all", action="store_true", help="dossier: export all pairs, not only flagged")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except ConfigValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        artifacts = COMMANDS[args.subcommand](cfg, out, args)
    except MissingInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except (ConfigValidationError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    seed = args.seed if args.seed is not None else (
        cfg.synth.seed if args.subcommand == "synth" else cfg.eval.seed
    )
    if args.preset:
        cfg = replace(cfg, preset=args.preset)
    write_manifest(out, args.subcommand, cfg, seed, artifacts)
    print(f"{args.subcommand}: wrote {len(artifacts)} artifact(s) to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
