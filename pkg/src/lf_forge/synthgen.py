"""Ground-truth labeled synthetic trajectory generator.

Each generated pair is a leader and follower on its own lateral lane, built
to either satisfy every retention condition of the filtering pipeline
(FOLLOWING) or to violate a specific one: overtaking (sustained closing
speed and lateral drift), tailgating (sub-2 m gaps at high speed),
approach/diverge (monotone gap sweep with single-signed relative velocity),
or independent motion (no lagged speed correlation). Kinematics are
integrated at dt/10 and sampled onto the dt grid; vehicles of different
pairs never overlap laterally, so base pairing recovers exactly the intended
pairs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np

from .fdgap import FDParams, desirable_gap
from .trajmodel import ConfigError, Vehicle, VehicleClass

DEFAULT_CLASS_DIMS: dict[str, tuple[float, float]] = {
    "TW": (2.0, 0.8),
    "CAR": (4.0, 1.8),
    "HV": (9.5, 2.5),
    "LCV": (5.5, 2.0),
    "AUTO": (2.7, 1.4),
}

SYNTH_COLUMNS = ("vehicle_id", "vclass", "t", "x", "y", "vx", "vy", "ax", "ay", "length", "width")


class ScenarioLabel(Enum):
    FOLLOWING = "FOLLOWING"
    OVERTAKING = "OVERTAKING"
    TAILGATING = "TAILGATING"
    APPROACH_ONLY = "APPROACH_ONLY"
    DIVERGE_ONLY = "DIVERGE_ONLY"
    INDEPENDENT = "INDEPENDENT"


@dataclass(frozen=True)
class GenConfig:
    dt: float = 0.5
    fine_substeps: int = 10
    lane_spacing: float = 25.0      # lateral separation between pair lanes, m
    stagger: float = 3.0            # start-time offset between pairs, s
    vclass: VehicleClass = VehicleClass.CAR
    base_speed: tuple[float, float] = (6.0, 10.0)     # m/s
    tailgate_speed: tuple[float, float] = (13.0, 16.0)
    follow_duration: tuple[float, float] = (40.0, 60.0)
    sweep_duration: tuple[float, float] = (30.0, 40.0)
    sweep_range: tuple[float, float] = (13.0, 17.0)   # monotone gap change, m

    def __post_init__(self) -> None:
        if self.dt <= 0 or self.fine_substeps < 1:
            raise ConfigError("dt must be positive and fine_substeps >= 1")
        for name in ("base_speed", "tailgate_speed", "follow_duration",
                     "sweep_duration", "sweep_range"):
            lo, hi = getattr(self, name)
            if not (0 < lo <= hi):
                raise ConfigError(f"{name} range must be positive and ordered, got ({lo}, {hi})")
        if self.base_speed[0] <= 2.5:
            raise ConfigError("base_speed must exceed the relative-velocity threshold margin")


@dataclass(frozen=True)
class PairTruth:
    lv_id: str
    sv_id: str
    label: ScenarioLabel
    t0: float
    t1: float


@dataclass
class SuiteResult:
    vehicles: list[Vehicle]
    truth: list[PairTruth] = field(default_factory=list)


def _gaussian_bump(t: np.ndarray, center: float, amp: float, sigma: float) -> np.ndarray:
    return amp * np.exp(-((t - center) ** 2) / (2.0 * sigma ** 2))


def _smoothstep(t: np.ndarray, start: float, stop: float) -> np.ndarray:
    u = np.clip((t - start) / max(stop - start, 1e-9), 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _diff(y: np.ndarray, h: float) -> np.ndarray:
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - y[:-2]) / (2.0 * h)
    d[0] = (y[1] - y[0]) / h
    d[-1] = (y[-1] - y[-2]) / h
    return d


def _lag_filter(target: np.ndarray, h: float, tau: float, delay: float, v_init: float) -> np.ndarray:
    """First-order response to a delayed target speed profile."""
    shift = int(round(delay / h))
    delayed = np.concatenate([np.full(shift, target[0]), target[:len(target) - shift]])
    out = np.empty_like(target)
    out[0] = v_init
    alpha = h / tau
    for i in range(1, len(target)):
        out[i] = out[i - 1] + alpha * (delayed[i - 1] - out[i - 1])
    return out


@dataclass
class _Profiles:
    """Fine-grid speed/lateral profiles for one pair, before integration."""

    duration: float
    v_lv: np.ndarray
    v_sv: np.ndarray
    gap0: float
    y_lv: np.ndarray
    y_sv: np.ndarray


def _gen_following(rng: np.random.Generator, tf: np.ndarray, cfg: GenConfig, fd: FDParams) -> _Profiles:
    T = tf[-1]
    v0 = rng.uniform(*cfg.base_speed)
    n_bumps = int(rng.integers(2, 4))
    anchors = np.linspace(8.0, T - 8.0, n_bumps)
    v_lv = np.full_like(tf, v0)
    for a in anchors:
        center = a + rng.uniform(-2.0, 2.0)
        amp = rng.uniform(0.8, 1.8) * rng.choice([-1.0, 1.0])
        v_lv += _gaussian_bump(tf, center, amp, rng.uniform(0.8, 1.5))
    delay = rng.uniform(0.4, 0.9)
    tau = rng.uniform(0.3, 0.7)
    v_sv = _lag_filter(v_lv, tf[1] - tf[0], tau, delay, v0)
    v_sv = v_sv + 0.03 * np.sin(2.0 * np.pi * tf / rng.uniform(6.0, 9.0) + rng.uniform(0, 2 * np.pi))
    gap0 = desirable_gap(fd, v0 * 3.6)
    off = rng.uniform(-0.5, 0.5)
    wob = 0.2 * np.sin(2.0 * np.pi * tf / rng.uniform(15.0, 25.0) + rng.uniform(0, 2 * np.pi))
    return _Profiles(T, v_lv, v_sv, gap0, np.zeros_like(tf), off + wob)


def _gen_overtaking(rng: np.random.Generator, tf: np.ndarray, cfg: GenConfig, fd: FDParams) -> _Profiles:
    T = tf[-1]
    v0 = rng.uniform(*cfg.base_speed)
    dv = rng.uniform(2.6, 3.0)       # sustained closing speed, beyond the threshold
    t_break = rng.uniform(6.5, 8.5)  # lateral overlap is lost around here
    gap0 = dv * t_break + rng.uniform(2.0, 4.0)
    if gap0 > 29.5:
        raise ConfigError("overtaking geometry infeasible: initial gap exceeds pairing range")
    v_lv = np.full_like(tf, v0)
    v_sv = np.full_like(tf, v0 + dv)
    y_off0 = rng.uniform(0.2, 0.4)
    # The smoothstep passes |lateral gap| = 1.8 (overlap loss for equal 1.8 m
    # widths) at ~0.61 of its ramp, i.e. at t ~= t_break.
    y_sv = y_off0 + (2.4 - y_off0) * _smoothstep(tf, 0.0, t_break / 0.61)
    return _Profiles(T, v_lv, v_sv, gap0, np.zeros_like(tf), y_sv)


def _gen_tailgating(rng: np.random.Generator, tf: np.ndarray, cfg: GenConfig, fd: FDParams) -> _Profiles:
    T = tf[-1]
    v0 = rng.uniform(*cfg.tailgate_speed)
    jitter = 0.05 * np.sin(2.0 * np.pi * tf / rng.uniform(8.0, 12.0) + rng.uniform(0, 2 * np.pi))
    v_lv = np.full_like(tf, v0)
    v_sv = v0 + jitter
    gap0 = rng.uniform(0.8, 1.6)
    off = rng.uniform(-0.4, 0.4)
    return _Profiles(T, v_lv, v_sv, gap0, np.zeros_like(tf), np.full_like(tf, off))


def _gen_sweep(rng: np.random.Generator, tf: np.ndarray, cfg: GenConfig, fd: FDParams,
               approaching: bool) -> _Profiles:
    T = tf[-1]
    v0 = rng.uniform(*cfg.base_speed)
    span = rng.uniform(*cfg.sweep_range)
    dv = span / T
    if not 0.05 <= dv <= 2.0:
        raise ConfigError(f"sweep geometry infeasible: needs {dv:.2f} m/s closing speed")
    jitter = 0.4 * dv * np.sin(2.0 * np.pi * tf / rng.uniform(7.0, 11.0) + rng.uniform(0, 2 * np.pi))
    if approaching:
        gap0 = span + rng.uniform(6.0, 8.0)
        v_lv = np.full_like(tf, v0)
        v_sv = v0 + dv + jitter
    else:
        gap0 = rng.uniform(6.0, 8.0)
        v_lv = v0 + dv + jitter
        v_sv = np.full_like(tf, v0)
    off = rng.uniform(-0.4, 0.4)
    return _Profiles(T, v_lv, v_sv, gap0, np.zeros_like(tf), np.full_like(tf, off))


def _gen_independent(rng: np.random.Generator, tf: np.ndarray, cfg: GenConfig, fd: FDParams) -> _Profiles:
    T = tf[-1]
    v0 = rng.uniform(*cfg.base_speed)
    amp = rng.uniform(1.3, 1.7)
    sigma = rng.uniform(0.7, 0.95)
    # Keep the two speed events farther apart than any side-lobe interaction
    # of the analysis scales (sqrt(3)*a per side, ~6.9 s at a 4 s scale), so
    # no energy peak of one vehicle falls within the matching lag of the
    # other's.
    t_lv = rng.uniform(6.0, 9.0)
    t_sv = t_lv + rng.uniform(16.5, 19.5)
    slow_lv = 0.2 * np.sin(2.0 * np.pi * tf / rng.uniform(24.0, 34.0) + rng.uniform(0, 2 * np.pi))
    slow_sv = 0.2 * np.sin(2.0 * np.pi * tf / rng.uniform(24.0, 34.0) + rng.uniform(0, 2 * np.pi))
    v_lv = v0 + slow_lv + _gaussian_bump(tf, t_lv, amp, sigma)
    v_sv = v0 + slow_sv + _gaussian_bump(tf, t_sv, amp, sigma)
    gap0 = desirable_gap(fd, v0 * 3.6)
    off = rng.uniform(-0.4, 0.4)
    return _Profiles(T, v_lv, v_sv, gap0, np.zeros_like(tf), np.full_like(tf, off))


_GENERATORS = {
    ScenarioLabel.FOLLOWING: lambda rng, tf, cfg, fd: _gen_following(rng, tf, cfg, fd),
    ScenarioLabel.OVERTAKING: lambda rng, tf, cfg, fd: _gen_overtaking(rng, tf, cfg, fd),
    ScenarioLabel.TAILGATING: lambda rng, tf, cfg, fd: _gen_tailgating(rng, tf, cfg, fd),
    ScenarioLabel.APPROACH_ONLY: lambda rng, tf, cfg, fd: _gen_sweep(rng, tf, cfg, fd, True),
    ScenarioLabel.DIVERGE_ONLY: lambda rng, tf, cfg, fd: _gen_sweep(rng, tf, cfg, fd, False),
    ScenarioLabel.INDEPENDENT: lambda rng, tf, cfg, fd: _gen_independent(rng, tf, cfg, fd),
}


def _duration_for(label: ScenarioLabel, rng: np.random.Generator, cfg: GenConfig) -> float:
    if label is ScenarioLabel.FOLLOWING:
        lo, hi = cfg.follow_duration
    elif label is ScenarioLabel.OVERTAKING:
        lo, hi = 28.0, 34.0
    elif label is ScenarioLabel.INDEPENDENT:
        lo, hi = 38.0, 46.0  # room for two well-separated speed events
    else:
        lo, hi = cfg.sweep_duration
    # Snap to the dt grid.
    return round(rng.uniform(lo, hi) / cfg.dt) * cfg.dt


def _build_vehicle(vid: str, vclass: VehicleClass, dims: tuple[float, float],
                   k0: int, dt: float, substeps: int,
                   v_fine: np.ndarray, y_fine: np.ndarray, x0: float) -> Vehicle:
    h = dt / substeps
    x_fine = x0 + np.concatenate([[0.0], np.cumsum((v_fine[1:] + v_fine[:-1]) / 2.0 * h)])
    a_fine = _diff(v_fine, h)
    vy_fine = _diff(y_fine, h)
    ay_fine = _diff(vy_fine, h)
    sl = slice(None, None, substeps)
    return Vehicle(
        id=vid, vclass=vclass, length=dims[0], width=dims[1],
        dt=dt, k0=k0,
        x_long=x_fine[sl], y_lat=y_fine[sl],
        v_long=v_fine[sl], v_lat=vy_fine[sl],
        a_long=a_fine[sl], a_lat=ay_fine[sl],
    )


def gen_pair(
    label: ScenarioLabel,
    fd: FDParams,
    seed: int | np.random.SeedSequence,
    index: int = 0,
    cfg: GenConfig = GenConfig(),
) -> tuple[Vehicle, Vehicle, ScenarioLabel]:
    """One labeled LV/SV pair; deterministic for a fixed (label, seed, index)."""
    rng = np.random.default_rng(seed)
    duration = _duration_for(label, rng, cfg)
    h = cfg.dt / cfg.fine_substeps
    n_fine = int(round(duration / h)) + 1
    tf = np.arange(n_fine) * h
    prof = _GENERATORS[label](rng, tf, cfg, fd)

    lane_y = cfg.lane_spacing * index
    start_k = int(round(index * cfg.stagger / cfg.dt))
    dims = DEFAULT_CLASS_DIMS[cfg.vclass.value]
    sv = _build_vehicle(
        f"F{index:04d}", cfg.vclass, dims, start_k, cfg.dt, cfg.fine_substeps,
        prof.v_sv, lane_y + prof.y_sv,
        x0=0.0,
    )
    lv = _build_vehicle(
        f"L{index:04d}", cfg.vclass, dims, start_k, cfg.dt, cfg.fine_substeps,
        prof.v_lv, lane_y + prof.y_lv,
        x0=prof.gap0 + dims[0],
    )
    return lv, sv, label


def gen_suite(
    counts: Mapping[ScenarioLabel, int],
    seed: int,
    cfg: GenConfig = GenConfig(),
    fd: FDParams | None = None,
) -> SuiteResult:
    """Deterministic labeled suite; pairs are laterally and temporally
    staggered so they cannot interact across lanes."""
    if fd is None:
        from .fdgap import default_fd_params
        fd = default_fd_params()[cfg.vclass]
    for label, count in counts.items():
        if count < 0:
            raise ConfigError(f"negative count for {label}")
    order = [label for label in ScenarioLabel for _ in range(counts.get(label, 0))]
    seeds = np.random.SeedSequence(seed).spawn(len(order))
    result = SuiteResult(vehicles=[])
    for index, (label, child) in enumerate(zip(order, seeds)):
        lv, sv, _ = gen_pair(label, fd, child, index=index, cfg=cfg)
        result.vehicles.extend([lv, sv])
        result.truth.append(PairTruth(
            lv_id=lv.id, sv_id=sv.id, label=label,
            t0=sv.t0, t1=sv.t1,
        ))
    return result


# ---------------------------------------------------------------------------
# Serialization: the CSV matches the canonical ingestion schema.
# ---------------------------------------------------------------------------


def write_suite_csv(path: str | Path, vehicles: list[Vehicle]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SYNTH_COLUMNS)
        for v in sorted(vehicles, key=lambda v: v.id):
            t = v.t
            for i in range(len(v)):
                writer.writerow([
                    v.id, v.vclass.value, format(t[i], ".8g"),
                    format(v.x_long[i], ".8g"), format(v.y_lat[i], ".8g"),
                    format(v.v_long[i], ".8g"), format(v.v_lat[i], ".8g"),
                    format(v.a_long[i], ".8g"), format(v.a_lat[i], ".8g"),
                    format(v.length, ".8g"), format(v.width, ".8g"),
                ])


def write_labels(path: str | Path, truth: list[PairTruth]) -> None:
    payload = [
        {"lv_id": p.lv_id, "sv_id": p.sv_id, "label": p.label.value,
         "t0": p.t0, "t1": p.t1}
        for p in truth
    ]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_labels(path: str | Path) -> list[PairTruth]:
    raw = json.loads(Path(path).read_text())
    return [PairTruth(lv_id=r["lv_id"], sv_id=r["sv_id"],
                      label=ScenarioLabel(r["label"]), t0=r["t0"], t1=r["t1"])
            for r in raw]


# ---------------------------------------------------------------------------
# Independent validator: re-checks each label's defining inequalities from
# the generated trajectories, without reusing the generator's internals.
# ---------------------------------------------------------------------------


def _best_corr_lag(lv_speed: np.ndarray, sv_speed: np.ndarray, dt: float) -> float:
    """Lag (s) maximizing cross-correlation of demeaned speeds; positive when
    the SV echoes the LV later in time."""
    a = lv_speed - lv_speed.mean()
    b = sv_speed - sv_speed.mean()
    corr = np.correlate(b, a, mode="full")
    lag_idx = int(np.argmax(corr)) - (len(a) - 1)
    return lag_idx * dt


def validate_pair(lv: Vehicle, sv: Vehicle, label: ScenarioLabel, fd: FDParams) -> list[str]:
    """Violations of the label's defining constraints; empty when clean."""
    from .trajmodel import interaction_series

    t0 = max(lv.t0, sv.t0)
    t1 = min(lv.t1, sv.t1)
    s = interaction_series(lv, sv, (t0, t1))
    dt = sv.dt
    problems: list[str] = []
    rng_gap = float(s.gap_long.max() - s.gap_long.min())
    rv = s.rel_vel

    if label is ScenarioLabel.FOLLOWING:
        if np.abs(rv).max() >= 2.5:
            problems.append(f"rel_vel reaches {np.abs(rv).max():.2f} m/s")
        if np.abs(s.gap_lat).max() >= 1.5:
            problems.append(f"lateral gap reaches {np.abs(s.gap_lat).max():.2f} m")
        s_des = np.array([desirable_gap(fd, v * 3.6) for v in s.sv_speed])
        if np.any(s.gap_long < 0.25 * s_des) or np.any(s.gap_long > 4.0 * s_des):
            problems.append("gap leaves the FD band")
        if rng_gap >= 10.0:
            problems.append(f"gap range {rng_gap:.1f} m")
        lag = _best_corr_lag(s.lv_speed, s.sv_speed, dt)
        if not 0.0 <= lag <= 2.0:
            problems.append(f"speed correlation lag {lag:.2f} s outside [0, 2]")
    elif label is ScenarioLabel.OVERTAKING:
        if rv.min() > -2.5:
            problems.append("never exceeds the closing-speed threshold")
        if np.abs(s.gap_lat).max() < 1.5:
            problems.append("no lateral excursion beyond 1.5 m")
        if s.gap_long[-1] >= s.gap_long[0]:
            problems.append("gap does not shrink")
    elif label is ScenarioLabel.TAILGATING:
        if s.gap_long.max() >= 2.0:
            problems.append(f"gap reaches {s.gap_long.max():.2f} m")
        if s.sv_speed.min() * 3.6 < 45.0:
            problems.append("not a high-speed pair")
    elif label in (ScenarioLabel.APPROACH_ONLY, ScenarioLabel.DIVERGE_ONLY):
        if rng_gap <= 10.0:
            problems.append(f"gap range only {rng_gap:.1f} m")
        nz = rv[np.abs(rv) > 1e-9]
        if nz.size and (np.sign(nz) != np.sign(nz[0])).any():
            problems.append("relative velocity changes sign")
        want_sign = -1.0 if label is ScenarioLabel.APPROACH_ONLY else 1.0
        if nz.size and np.sign(nz[0]) != want_sign:
            problems.append("sweep direction is wrong")
        if np.abs(rv).max() >= 2.5:
            problems.append("closing speed too high for a clean sweep")
    elif label is ScenarioLabel.INDEPENDENT:
        if rng_gap >= 10.0:
            problems.append(f"gap range {rng_gap:.1f} m")
        if np.abs(rv).max() >= 2.5:
            problems.append("relative velocity exceeds the threshold")
        lag = _best_corr_lag(s.lv_speed, s.sv_speed, dt)
        if abs(lag) <= 2.0:
            problems.append(f"speed profiles correlate at lag {lag:.2f} s")
    return problems


def validate_suite(result: SuiteResult, fd: FDParams) -> dict[str, list[str]]:
    """Map of offending pair key -> violations; empty when the suite is clean."""
    by_id = {v.id: v for v in result.vehicles}
    out: dict[str, list[str]] = {}
    for truth in result.truth:
        problems = validate_pair(by_id[truth.lv_id], by_id[truth.sv_id], truth.label, fd)
        if problems:
            out[f"{truth.lv_id}-{truth.sv_id}"] = problems
    return out
