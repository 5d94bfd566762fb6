"""Run configuration: JSON loading, schema validation, defaults, hashing.

A single JSON config drives every subcommand. Validation happens against the
published RunConfig schema before any processing; failures carry the JSON
path of the offending field so the CLI can report it and exit with the
config-error status.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from .fdgap import FDParams, default_fd_params
from .filters import ThresholdConfig, ThresholdPolicy
from .pairing import DuplicateRule, PairingCriteria
from .synthgen import DEFAULT_CLASS_DIMS, ScenarioLabel
from .trajmodel import VehicleClass
from .wavecorr import WaveletConfig

# Canonical column names written by the synthetic generator and accepted by
# default at ingestion.
DEFAULT_MAPPING = {
    "id": "vehicle_id",
    "class": "vclass",
    "t": "t",
    "x_long": "x",
    "y_lat": "y",
    "v_long": "vx",
    "v_lat": "vy",
    "a_long": "ax",
    "a_lat": "ay",
    "length": "length",
    "width": "width",
}


class ConfigValidationError(ValueError):
    def __init__(self, field_path: str, message: str):
        super().__init__(f"config field '{field_path}': {message}")
        self.field_path = field_path


def _schema(name: str) -> dict:
    with resources.files("lf_forge.schemas").joinpath(name).open() as handle:
        return json.load(handle)


def runconfig_schema() -> dict:
    return _schema("runconfig.schema.json")


def dossier_schema() -> dict:
    return _schema("pair_dossier.schema.json")


def review_decision_schema() -> dict:
    return _schema("review_decision.schema.json")


def validate_against(schema: dict, payload: Any) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(payload), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "(root)"
        raise ConfigValidationError(path, err.message)


@dataclass(frozen=True)
class EvalSettings:
    tau: float = 0.5
    k: int = 5
    seed: int = 0
    min_pairs: int = 20


@dataclass(frozen=True)
class SynthSettings:
    counts: dict[ScenarioLabel, int] = field(
        default_factory=lambda: {label: 50 for label in ScenarioLabel}
    )
    seed: int = 7


@dataclass(frozen=True)
class RunConfig:
    input: str | None = None
    dt: float = 0.5
    mapping: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_MAPPING))
    class_dims: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_CLASS_DIMS)
    )
    fd_params: dict[VehicleClass, FDParams] = field(default_factory=default_fd_params)
    pairing: PairingCriteria = field(default_factory=PairingCriteria)
    thresholds: ThresholdPolicy = field(default_factory=ThresholdPolicy)
    wavelet: WaveletConfig = field(default_factory=WaveletConfig)
    eval: EvalSettings = field(default_factory=EvalSettings)
    synth: SynthSettings = field(default_factory=SynthSettings)
    preset: str = "approach4"
    out_dir: str = "out"

    def resolved_dict(self) -> dict:
        """JSON-ready resolved configuration (defaults applied)."""
        return {
            "input": self.input,
            "dt": self.dt,
            "mapping": dict(self.mapping),
            "class_dims": {k: list(v) for k, v in self.class_dims.items()},
            "fd_params": {
                c.value: {"w": p.w, "k_j": p.k_j} for c, p in self.fd_params.items()
            },
            "pairing": {
                "max_gap": self.pairing.max_gap,
                "require_overlap": self.pairing.require_overlap,
                "min_duration": self.pairing.min_duration,
                "duplicate_rule": self.pairing.duplicate_rule.value,
            },
            "thresholds": _threshold_dict(self.thresholds.default),
            "threshold_overrides": {
                tag: _threshold_dict(cfg) for tag, cfg in self.thresholds.per_category.items()
            },
            "wavelet": {
                "scales": list(self.wavelet.scales),
                "max_lag": self.wavelet.max_lag,
                "min_matches": self.wavelet.min_matches,
                "prominence_frac": self.wavelet.prominence_frac,
                "lag_mode": self.wavelet.lag_mode,
            },
            "eval": asdict(self.eval),
            "synth": {
                "counts": {label.value: n for label, n in self.synth.counts.items()},
                "seed": self.synth.seed,
            },
            "preset": self.preset,
            "out_dir": self.out_dir,
        }

    def hash(self) -> str:
        canonical = json.dumps(self.resolved_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def _threshold_dict(cfg: ThresholdConfig) -> dict:
    return {
        "rel_vel_abs_max": cfg.rel_vel_abs_max,
        "lat_gap_abs_max": cfg.lat_gap_abs_max,
        "tailgate_gap": cfg.tailgate_gap,
        "far_gap": cfg.far_gap,
        "gap_range_max": cfg.gap_range_max,
        "sign_change_ratio_min": cfg.sign_change_ratio_min,
        "pct_low": cfg.pct_low,
        "pct_high": cfg.pct_high,
        "speed_bin_width": cfg.speed_bin_width,
        "gap_bin_width": cfg.gap_bin_width,
        "fd_band": list(cfg.fd_band),
        "high_speed_pct": cfg.high_speed_pct,
        "moderate_pct": list(cfg.moderate_pct),
    }


def _threshold_config(raw: Mapping[str, Any], base: ThresholdConfig | None = None) -> ThresholdConfig:
    merged = _threshold_dict(base) if base is not None else _threshold_dict(ThresholdConfig())
    merged.update({k: v for k, v in raw.items()})
    merged["fd_band"] = tuple(merged["fd_band"])
    merged["moderate_pct"] = tuple(merged["moderate_pct"])
    return ThresholdConfig(**merged)


def config_from_dict(raw: Mapping[str, Any]) -> RunConfig:
    """RunConfig from a validated JSON payload; unspecified fields default."""
    validate_against(runconfig_schema(), dict(raw))

    fd_params = dict(default_fd_params())
    for tag, spec in raw.get("fd_params", {}).items():
        vclass = VehicleClass(tag)
        fd_params[vclass] = FDParams(vclass=vclass, w=spec["w"], k_j=spec["k_j"])

    pairing_raw = raw.get("pairing", {})
    pairing = PairingCriteria(
        max_gap=pairing_raw.get("max_gap", 30.0),
        require_overlap=pairing_raw.get("require_overlap", True),
        min_duration=pairing_raw.get("min_duration", 5.0),
        duplicate_rule=DuplicateRule(pairing_raw.get("duplicate_rule", "closest_gap")),
    )

    default_thresholds = _threshold_config(raw.get("thresholds", {}))
    overrides = {
        tag: _threshold_config(spec, base=default_thresholds)
        for tag, spec in raw.get("threshold_overrides", {}).items()
    }

    wavelet_raw = raw.get("wavelet", {})
    wavelet = WaveletConfig(
        scales=tuple(wavelet_raw.get("scales", (1.0, 2.0, 4.0))),
        max_lag=wavelet_raw.get("max_lag", 2.0),
        min_matches=wavelet_raw.get("min_matches", 1),
        prominence_frac=wavelet_raw.get("prominence_frac", 0.1),
        lag_mode=wavelet_raw.get("lag_mode", "causal"),
    )

    eval_raw = raw.get("eval", {})
    synth_raw = raw.get("synth", {})
    counts = {label: 50 for label in ScenarioLabel}
    if "counts" in synth_raw:
        counts = {ScenarioLabel(tag): n for tag, n in synth_raw["counts"].items()}

    mapping = dict(DEFAULT_MAPPING)
    mapping.update(raw.get("mapping", {}))
    class_dims = {k: tuple(v) for k, v in raw.get("class_dims", DEFAULT_CLASS_DIMS).items()}

    return RunConfig(
        input=raw.get("input"),
        dt=raw.get("dt", 0.5),
        mapping=mapping,
        class_dims=class_dims,
        fd_params=fd_params,
        pairing=pairing,
        thresholds=ThresholdPolicy(default=default_thresholds, per_category=overrides),
        wavelet=wavelet,
        eval=EvalSettings(
            tau=eval_raw.get("tau", 0.5),
            k=eval_raw.get("k", 5),
            seed=eval_raw.get("seed", 0),
            min_pairs=eval_raw.get("min_pairs", 20),
        ),
        synth=SynthSettings(counts=counts, seed=synth_raw.get("seed", 7)),
        preset=raw.get("preset", "approach4"),
        out_dir=raw.get("out_dir", "out"),
    )


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigValidationError("(root)", f"invalid JSON: {exc}")
    return config_from_dict(raw)
