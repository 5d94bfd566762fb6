"""Outlier screening for candidate pairs and the multi-stage pipeline runner.

Stage 1 flags individual samples against speed-gap statistics of the pair's
category (percentile bands within speed bins, Tukey whiskers, relative
velocity and lateral gap limits, tailgating/far-gap rules, and the
fundamental-diagram gap band), then trims flagged prefix/suffix runs. Stage 2
removes pairs whose gap range and relative-velocity sign-change ratio mark
them as approaching/diverging rather than following. The wavelet stage keeps
only pairs whose leader and follower speed-energy peaks line up within the
allowed lag.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .fdgap import FDParams, desirable_gap, gap_slope
from .pairing import CandidatePair
from .trajmodel import ConfigError, VehicleClass
from .wavecorr import MatchResult, WaveletConfig, cwt_energy, peak_match

log = logging.getLogger(__name__)


class FlagReason(Enum):
    GAP_BELOW_P5 = "GAP_BELOW_P5"
    GAP_ABOVE_P95 = "GAP_ABOVE_P95"
    SPEED_ABOVE_WHISKER = "SPEED_ABOVE_WHISKER"
    SPEED_BELOW_WHISKER = "SPEED_BELOW_WHISKER"
    REL_VEL_EXCESS = "REL_VEL_EXCESS"
    LAT_GAP_EXCESS = "LAT_GAP_EXCESS"
    TAILGATE = "TAILGATE"
    FAR_GAP = "FAR_GAP"
    FD_BAND = "FD_BAND"


ALL_FLAGS = tuple(FlagReason)


class RemovalReason(Enum):
    TRIMMED_TOO_SHORT = "TRIMMED_TOO_SHORT"
    APPROACH_DIVERGE = "APPROACH_DIVERGE"
    NO_PEAK_MATCH = "NO_PEAK_MATCH"
    WAVELET_TOO_SHORT = "WAVELET_TOO_SHORT"


MS_TO_KMH = 3.6


@dataclass(frozen=True)
class ThresholdConfig:
    """Screening thresholds; lengths in meters, speeds at the config boundary
    in km/h, relative velocity in m/s."""

    rel_vel_abs_max: float = 2.5
    lat_gap_abs_max: float = 1.5
    tailgate_gap: float = 2.0
    far_gap: float = 28.0
    gap_range_max: float = 10.0
    sign_change_ratio_min: float = 0.3
    pct_low: float = 5.0
    pct_high: float = 95.0
    speed_bin_width: float = 5.0           # km/h
    gap_bin_width: float | None = None     # m; None derives from the FD slope
    fd_band: tuple[float, float] = (0.25, 4.0)
    high_speed_pct: float = 75.0           # "higher speeds" cut for tailgating
    moderate_pct: tuple[float, float] = (25.0, 75.0)  # "moderate speeds" band

    def __post_init__(self) -> None:
        if not 0.0 < self.pct_low < self.pct_high < 100.0:
            raise ValueError(f"need 0 < pct_low < pct_high < 100, got {self.pct_low}, {self.pct_high}")
        for name in ("rel_vel_abs_max", "lat_gap_abs_max", "tailgate_gap",
                     "far_gap", "gap_range_max", "speed_bin_width"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.sign_change_ratio_min <= 1.0:
            raise ValueError("sign_change_ratio_min must be in [0, 1]")
        if self.gap_bin_width is not None and self.gap_bin_width <= 0:
            raise ValueError("gap_bin_width must be positive")
        if not (0 < self.fd_band[0] < self.fd_band[1]):
            raise ValueError(f"fd_band multipliers must be increasing and positive, got {self.fd_band}")


@dataclass(frozen=True)
class ThresholdPolicy:
    """Global thresholds with optional per-category overrides ('CAR-CAR')."""

    default: ThresholdConfig = field(default_factory=ThresholdConfig)
    per_category: Mapping[str, ThresholdConfig] = field(default_factory=dict)

    def for_category(self, tag: str) -> ThresholdConfig:
        return self.per_category.get(tag, self.default)


@dataclass(frozen=True)
class BinStats:
    lo: float
    hi: float
    count: int
    p_low: float
    p_high: float


@dataclass(frozen=True)
class CategoryStats:
    """Speed-gap population statistics of one LF category.

    Speeds in km/h, gaps in meters. Whiskers are Tukey fences clamped to the
    data extremes. Both conditionals are kept: gap percentiles within speed
    bins (used for gating) and speed percentiles within gap bins (diagnostic).
    """

    n_samples: int
    speed_whiskers: tuple[float, float]
    gap_whiskers: tuple[float, float]
    speed_high_cut: float
    speed_moderate: tuple[float, float]
    gap_by_speed_bin: dict[int, BinStats]
    speed_by_gap_bin: dict[int, BinStats]
    speed_bin_width: float
    gap_bin_width: float


def tukey_whiskers(values: np.ndarray) -> tuple[float, float]:
    """Q1 - 1.5*IQR and Q3 + 1.5*IQR, clamped to the data extremes."""
    q1, q3 = np.percentile(values, [25.0, 75.0])
    iqr = q3 - q1
    return (
        float(max(values.min(), q1 - 1.5 * iqr)),
        float(min(values.max(), q3 + 1.5 * iqr)),
    )


def _bin_percentiles(
    key: np.ndarray, val: np.ndarray, width: float, pct: tuple[float, float]
) -> dict[int, BinStats]:
    bins: dict[int, BinStats] = {}
    idx = np.floor(key / width).astype(int)
    for b in np.unique(idx):
        sel = val[idx == b]
        p_lo, p_hi = np.percentile(sel, pct)
        bins[int(b)] = BinStats(
            lo=float(b * width), hi=float((b + 1) * width),
            count=int(sel.size), p_low=float(p_lo), p_high=float(p_hi),
        )
    return bins


def resolve_gap_bin_width(cfg: ThresholdConfig, fd: FDParams) -> float:
    """Configured gap bin width, or the desirable-gap growth across one speed bin."""
    if cfg.gap_bin_width is not None:
        return cfg.gap_bin_width
    return gap_slope(fd) * cfg.speed_bin_width


def category_stats(
    pairs: Sequence[CandidatePair],
    cfg: ThresholdConfig,
    fd: FDParams,
) -> CategoryStats:
    """Pooled speed-gap statistics over all samples of one category."""
    if not pairs:
        raise ValueError("category has no pairs")
    speed = np.concatenate([p.samples.sv_speed for p in pairs]) * MS_TO_KMH
    gap = np.concatenate([p.samples.gap_long for p in pairs])
    if speed.size < 2:
        raise ValueError("category has fewer than 2 samples")
    gap_bin_width = resolve_gap_bin_width(cfg, fd)
    pct = (cfg.pct_low, cfg.pct_high)
    mod_lo, mod_hi = np.percentile(speed, cfg.moderate_pct)
    return CategoryStats(
        n_samples=int(speed.size),
        speed_whiskers=tukey_whiskers(speed),
        gap_whiskers=tukey_whiskers(gap),
        speed_high_cut=float(np.percentile(speed, cfg.high_speed_pct)),
        speed_moderate=(float(mod_lo), float(mod_hi)),
        gap_by_speed_bin=_bin_percentiles(speed, gap, cfg.speed_bin_width, pct),
        speed_by_gap_bin=_bin_percentiles(gap, speed, gap_bin_width, pct),
        speed_bin_width=cfg.speed_bin_width,
        gap_bin_width=gap_bin_width,
    )


def flag_stage1(
    pair: CandidatePair,
    stats: CategoryStats,
    cfg: ThresholdConfig,
    fd: FDParams,
    active: Iterable[FlagReason] = ALL_FLAGS,
) -> dict[int, tuple[FlagReason, ...]]:
    """Per-sample outlier flags; each sample carries every reason it triggers."""
    active = frozenset(active)
    s = pair.samples
    speed = s.sv_speed * MS_TO_KMH
    gap = s.gap_long
    n = len(s)
    reasons: dict[FlagReason, np.ndarray] = {}

    if FlagReason.GAP_BELOW_P5 in active or FlagReason.GAP_ABOVE_P95 in active:
        below = np.zeros(n, dtype=bool)
        above = np.zeros(n, dtype=bool)
        bin_idx = np.floor(speed / stats.speed_bin_width).astype(int)
        for i in range(n):
            b = stats.gap_by_speed_bin.get(int(bin_idx[i]))
            if b is None:
                continue
            below[i] = gap[i] < b.p_low
            above[i] = gap[i] > b.p_high
        reasons[FlagReason.GAP_BELOW_P5] = below
        reasons[FlagReason.GAP_ABOVE_P95] = above

    reasons[FlagReason.SPEED_ABOVE_WHISKER] = speed > stats.speed_whiskers[1]
    reasons[FlagReason.SPEED_BELOW_WHISKER] = speed < stats.speed_whiskers[0]
    reasons[FlagReason.REL_VEL_EXCESS] = np.abs(s.rel_vel) > cfg.rel_vel_abs_max
    reasons[FlagReason.LAT_GAP_EXCESS] = np.abs(s.gap_lat) > cfg.lat_gap_abs_max
    reasons[FlagReason.TAILGATE] = (gap < cfg.tailgate_gap) & (speed > stats.speed_high_cut)
    reasons[FlagReason.FAR_GAP] = (
        (gap > cfg.far_gap)
        & (speed >= stats.speed_moderate[0])
        & (speed <= stats.speed_moderate[1])
    )
    s_des = desirable_gap(fd, 0.0) + gap_slope(fd) * speed
    reasons[FlagReason.FD_BAND] = (gap < cfg.fd_band[0] * s_des) | (gap > cfg.fd_band[1] * s_des)

    flags: dict[int, list[FlagReason]] = {}
    for reason in ALL_FLAGS:
        if reason not in active or reason not in reasons:
            continue
        for i in np.flatnonzero(reasons[reason]):
            flags.setdefault(int(i), []).append(reason)
    return {i: tuple(rs) for i, rs in sorted(flags.items())}


@dataclass(frozen=True)
class TrimResult:
    pair: CandidatePair | None
    removed: RemovalReason | None
    kept: tuple[int, int]  # surviving [start, stop) index range of the input samples


def trim_pair(
    pair: CandidatePair,
    flags: Iterable[int],
    min_duration: float,
) -> TrimResult:
    """Drop maximal flagged runs at the start and end of the pair.

    Interior flagged samples are retained to keep the time series contiguous.
    If the surviving run is shorter than ``min_duration`` under the
    (n-1)*dt convention, the pair is removed.
    """
    n = len(pair.samples)
    flagged = set(int(i) for i in flags)
    start = 0
    while start < n and start in flagged:
        start += 1
    stop = n
    while stop > start and (stop - 1) in flagged:
        stop -= 1
    dt = pair.sv.dt
    if stop - start < 2 or (stop - start - 1) * dt < min_duration:
        return TrimResult(pair=None, removed=RemovalReason.TRIMMED_TOO_SHORT, kept=(start, start))
    if start == 0 and stop == n:
        return TrimResult(pair=pair, removed=None, kept=(0, n))
    return TrimResult(pair=pair.with_samples(pair.samples[start:stop]), removed=None, kept=(start, stop))


def _series_of(obj, attr: str) -> np.ndarray:
    if isinstance(obj, CandidatePair):
        return getattr(obj.samples, attr)
    if hasattr(obj, attr):
        return np.asarray(getattr(obj, attr), dtype=float)
    return np.asarray(obj, dtype=float)


def gap_range(pair) -> float:
    """Spread of the longitudinal gap over the pair: max - min."""
    gap = _series_of(pair, "gap_long")
    if gap.size == 0:
        raise ValueError("gap_range needs at least one sample")
    return float(abs(gap.max() - gap.min()))


def sign_change_ratio(pair) -> float:
    """Relative-velocity sign flips divided by the total sample count.

    Zeros inherit the previous nonzero sign; an all-zero series gives 0 by
    convention.
    """
    rv = _series_of(pair, "rel_vel")
    n = rv.size
    if n < 2:
        raise ValueError("sign_change_ratio needs at least two samples")
    changes = 0
    prev = 0
    for v in rv:
        s = int(v > 0) - int(v < 0)
        if s == 0:
            s = prev
        if prev != 0 and s != prev:
            changes += 1
        if s != 0:
            prev = s
    if prev == 0:
        log.debug("sign_change_ratio: all-zero relative velocity, returning 0")
        return 0.0
    return changes / n


def flag_stage2(pair: CandidatePair, cfg: ThresholdConfig) -> RemovalReason | None:
    """Approach/diverge verdict: removed only when BOTH the gap range exceeds
    the limit and the sign-change ratio falls below the minimum."""
    if gap_range(pair) > cfg.gap_range_max and sign_change_ratio(pair) < cfg.sign_change_ratio_min:
        return RemovalReason.APPROACH_DIVERGE
    return None


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Stage1Spec:
    flags: tuple[FlagReason, ...] = ALL_FLAGS
    name: str = "stage1"


@dataclass(frozen=True)
class Stage2Spec:
    name: str = "stage2"


@dataclass(frozen=True)
class WaveletSpec:
    min_matches: int | None = None  # None: take the wavelet config's value
    name: str = "wavelet"


StageSpec = Stage1Spec | Stage2Spec | WaveletSpec

_NO_FD_BAND = tuple(f for f in ALL_FLAGS if f is not FlagReason.FD_BAND)

# approach4 (stage1 -> stage2 -> wavelet) is the validated composition; the
# other presets are best-effort orderings and are not acceptance-tested.
PRESETS: dict[str, tuple[StageSpec, ...]] = {
    "approach1": (Stage1Spec(flags=_NO_FD_BAND), Stage2Spec(), WaveletSpec(min_matches=3)),
    "approach2": (Stage1Spec(flags=_NO_FD_BAND), WaveletSpec(), Stage2Spec()),
    "approach3": (Stage1Spec(), WaveletSpec(), Stage2Spec()),
    "approach4": (Stage1Spec(), Stage2Spec(), WaveletSpec()),
}


def parse_stage_spec(desc) -> StageSpec:
    """Stage descriptor from config JSON: {'stage': 'stage1', ...}."""
    if isinstance(desc, (Stage1Spec, Stage2Spec, WaveletSpec)):
        return desc
    if not isinstance(desc, Mapping) or "stage" not in desc:
        raise ConfigError(f"stage descriptor must be a mapping with a 'stage' key, got {desc!r}")
    kind = desc["stage"]
    if kind == "stage1":
        names = desc.get("flags")
        if names is None:
            return Stage1Spec()
        try:
            return Stage1Spec(flags=tuple(FlagReason(n) for n in names))
        except ValueError as exc:
            raise ConfigError(f"unknown stage1 flag: {exc}")
    if kind == "stage2":
        return Stage2Spec()
    if kind == "wavelet":
        return WaveletSpec(min_matches=desc.get("min_matches"))
    raise ConfigError(f"unknown stage descriptor {kind!r}")


def resolve_preset(preset) -> tuple[StageSpec, ...]:
    if isinstance(preset, str):
        try:
            return PRESETS[preset]
        except KeyError:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    return tuple(parse_stage_spec(d) for d in preset)


@dataclass
class StageRecord:
    index: int
    name: str
    pairs_in: int
    pairs_out: int
    points_in: int
    points_out: int
    removed: dict[str, str] = field(default_factory=dict)     # pair_id -> reason
    trimmed: dict[str, tuple[float, float]] = field(default_factory=dict)  # pair_id -> new window


@dataclass
class FilterOutcome:
    """Ledger of a pipeline run: per-stage counts plus per-pair flags/verdicts."""

    preset: str | None
    stages: list[StageRecord] = field(default_factory=list)
    retained: list[CandidatePair] = field(default_factory=list)
    base_pairs: int = 0
    base_points: int = 0
    flag_times: dict[str, dict[float, tuple[str, ...]]] = field(default_factory=dict)
    wavelet_results: dict[str, MatchResult] = field(default_factory=dict)

    @property
    def removed_by_pair(self) -> dict[str, tuple[int, str]]:
        out: dict[str, tuple[int, str]] = {}
        for rec in self.stages:
            for pid, reason in rec.removed.items():
                out[pid] = (rec.index, reason)
        return out


def _max_threads() -> int:
    raw = os.environ.get("LF_FORGE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _pmap(fn: Callable, items: Sequence) -> list:
    threads = min(_max_threads(), len(items)) if items else 1
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _points(pairs: Sequence[CandidatePair]) -> int:
    return sum(len(p.samples) for p in pairs)


def _run_stage1(
    spec: Stage1Spec,
    pairs: list[CandidatePair],
    policy: ThresholdPolicy,
    fd_params: Mapping[VehicleClass, FDParams],
    min_duration: float,
    outcome: FilterOutcome,
    record: StageRecord,
) -> list[CandidatePair]:
    by_cat: dict[str, list[CandidatePair]] = {}
    for p in pairs:
        by_cat.setdefault(p.category_tag, []).append(p)
    survivors: list[CandidatePair] = []
    for tag, members in by_cat.items():
        cfg = policy.for_category(tag)
        fd = fd_params[members[0].sv.vclass]
        stats = category_stats(members, cfg, fd)
        for pair in members:
            flags = flag_stage1(pair, stats, cfg, fd, active=spec.flags)
            if flags:
                times = outcome.flag_times.setdefault(pair.pair_id, {})
                for i, rs in flags.items():
                    t = float(pair.samples.t[i])
                    merged = dict.fromkeys(times.get(t, ()))
                    merged.update(dict.fromkeys(r.value for r in rs))
                    times[t] = tuple(merged)
            result = trim_pair(pair, flags.keys(), min_duration)
            if result.pair is None:
                record.removed[pair.pair_id] = result.removed.value
            else:
                if result.kept != (0, len(pair.samples)):
                    record.trimmed[pair.pair_id] = result.pair.window
                survivors.append(result.pair)
    return survivors


def _run_wavelet(
    spec: WaveletSpec,
    pairs: list[CandidatePair],
    wavelet_cfg: WaveletConfig,
    outcome: FilterOutcome,
    record: StageRecord,
) -> list[CandidatePair]:
    cfg = wavelet_cfg
    if spec.min_matches is not None:
        cfg = replace(cfg, min_matches=spec.min_matches)

    def evaluate(pair: CandidatePair) -> tuple[CandidatePair, MatchResult | None]:
        dt = pair.sv.dt
        n = len(pair.samples)
        usable = tuple(a for a in cfg.scales if math.ceil(2.0 * a / dt) <= n)
        if not usable:
            return pair, None
        pair_cfg = replace(cfg, scales=usable)
        t0 = float(pair.samples.t[0])
        lv_prof = cwt_energy(pair.samples.lv_speed, dt, pair_cfg, t0=t0)
        sv_prof = cwt_energy(pair.samples.sv_speed, dt, pair_cfg, t0=t0)
        return pair, peak_match(lv_prof, sv_prof, pair_cfg)

    survivors: list[CandidatePair] = []
    for pair, match in _pmap(evaluate, pairs):
        if match is None:
            record.removed[pair.pair_id] = RemovalReason.WAVELET_TOO_SHORT.value
            continue
        outcome.wavelet_results[pair.pair_id] = match
        if match.matched:
            survivors.append(pair)
        else:
            record.removed[pair.pair_id] = RemovalReason.NO_PEAK_MATCH.value
    return survivors


def run_pipeline(
    pairs: Sequence[CandidatePair],
    preset,
    policy: ThresholdPolicy,
    fd_params: Mapping[VehicleClass, FDParams],
    wavelet_cfg: WaveletConfig,
    min_duration: float = 5.0,
) -> FilterOutcome:
    """Apply the stages of ``preset`` in order, each consuming the survivors
    of the previous, and return the full ledger. Deterministic for fixed
    inputs and configuration."""
    stages = resolve_preset(preset)
    current = sorted(pairs, key=lambda p: (p.sv.id, p.window[0]))
    outcome = FilterOutcome(
        preset=preset if isinstance(preset, str) else None,
        base_pairs=len(current),
        base_points=_points(current),
    )
    for index, spec in enumerate(stages, start=1):
        record = StageRecord(
            index=index, name=spec.name,
            pairs_in=len(current), pairs_out=0,
            points_in=_points(current), points_out=0,
        )
        if isinstance(spec, Stage1Spec):
            current = _run_stage1(spec, current, policy, fd_params, min_duration, outcome, record)
        elif isinstance(spec, Stage2Spec):
            survivors = []
            for pair in current:
                reason = flag_stage2(pair, policy.for_category(pair.category_tag))
                if reason is None:
                    survivors.append(pair)
                else:
                    record.removed[pair.pair_id] = reason.value
            current = survivors
        elif isinstance(spec, WaveletSpec):
            current = _run_wavelet(spec, current, wavelet_cfg, outcome, record)
        else:  # pragma: no cover - resolve_preset rejects unknown descriptors
            raise ConfigError(f"unknown stage spec {spec!r}")
        record.pairs_out = len(current)
        record.points_out = _points(current)
        outcome.stages.append(record)
    outcome.retained = current
    return outcome
