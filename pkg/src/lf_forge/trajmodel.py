"""Trajectory data model, CSV ingestion, and pairwise interaction kinematics.

All internal quantities are SI (meters, seconds, m/s, m/s^2). Positions are
front-bumper longitudinal coordinates increasing in the travel direction;
lateral positions are vehicle centerlines, positive to the right. Every
trajectory lives on a uniform time grid with spacing ``dt``; irregular input
is linearly resampled onto that grid at ingestion.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterator, Mapping, Sequence

import numpy as np

GRID_EPS = 1e-9


class VehicleClass(Enum):
    """Closed set of vehicle classes; unknown tags are rejected at ingestion."""

    TW = "TW"
    CAR = "CAR"
    HV = "HV"
    LCV = "LCV"
    AUTO = "AUTO"


# Canonical column order used in reports (matches the gap-table layout).
CLASS_ORDER = (
    VehicleClass.TW,
    VehicleClass.CAR,
    VehicleClass.HV,
    VehicleClass.LCV,
    VehicleClass.AUTO,
)

# Relative size ranking used for pair asymmetry tagging.
SIZE_RANK = {
    VehicleClass.TW: 0,
    VehicleClass.AUTO: 1,
    VehicleClass.CAR: 2,
    VehicleClass.LCV: 3,
    VehicleClass.HV: 4,
}


@dataclass(frozen=True)
class TrajectoryPoint:
    """Kinematic state of one vehicle at one grid instant."""

    t: float
    x_long: float
    y_lat: float
    v_long: float
    v_lat: float
    a_long: float
    a_lat: float


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Vehicle:
    """A single vehicle's resampled trajectory plus class and dimensions.

    Times are stored as integer grid indices times ``dt`` so the grid is an
    exact multiple of the step. Arrays are read-only; instances are safe to
    share across threads.
    """

    id: str
    vclass: VehicleClass
    length: float
    width: float
    dt: float
    k0: int  # index of the first sample on the global grid (t = k0 * dt)
    x_long: np.ndarray
    y_lat: np.ndarray
    v_long: np.ndarray
    v_lat: np.ndarray
    a_long: np.ndarray
    a_lat: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.x_long)
        if n == 0:
            raise ValueError(f"vehicle {self.id}: empty trajectory")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError(f"vehicle {self.id}: non-positive length {self.length}")
        if not (self.width > 0 and math.isfinite(self.width)):
            raise ValueError(f"vehicle {self.id}: non-positive width {self.width}")
        for name in ("x_long", "y_lat", "v_long", "v_lat", "a_long", "a_lat"):
            arr = getattr(self, name)
            if len(arr) != n:
                raise ValueError(f"vehicle {self.id}: {name} length {len(arr)} != {n}")
            object.__setattr__(self, name, _readonly(arr))

    def __len__(self) -> int:
        return len(self.x_long)

    @property
    def t(self) -> np.ndarray:
        return _readonly((self.k0 + np.arange(len(self))) * self.dt)

    @property
    def t0(self) -> float:
        return self.k0 * self.dt

    @property
    def t1(self) -> float:
        return (self.k0 + len(self) - 1) * self.dt

    def index_at(self, t: float) -> int:
        """Index of the grid instant ``t``; raises if off-grid or uncovered."""
        k = round(t / self.dt)
        if abs(k * self.dt - t) > GRID_EPS:
            raise ValueError(f"t={t} is not on the dt={self.dt} grid")
        i = k - self.k0
        if not 0 <= i < len(self):
            raise ValueError(f"vehicle {self.id} has no sample at t={t}")
        return i

    def covers(self, t: float) -> bool:
        k = round(t / self.dt)
        return abs(k * self.dt - t) <= GRID_EPS and 0 <= k - self.k0 < len(self)

    def point(self, i: int) -> TrajectoryPoint:
        return TrajectoryPoint(
            t=(self.k0 + i) * self.dt,
            x_long=float(self.x_long[i]),
            y_lat=float(self.y_lat[i]),
            v_long=float(self.v_long[i]),
            v_lat=float(self.v_lat[i]),
            a_long=float(self.a_long[i]),
            a_lat=float(self.a_lat[i]),
        )

    @property
    def points(self) -> tuple[TrajectoryPoint, ...]:
        return tuple(self.point(i) for i in range(len(self)))


@dataclass(frozen=True)
class InteractionSample:
    """Leader-follower interaction quantities at one grid instant.

    ``gap_long`` is bumper-to-bumper clearance: rear of LV minus front of SV.
    ``gap_lat`` is signed, positive when the SV centerline is right of the LV
    centerline. ``rel_vel`` is v_LV - v_SV (longitudinal).
    """

    t: float
    gap_long: float
    gap_lat: float
    overlap: float
    rel_vel: float
    sv_speed: float
    lv_speed: float
    sv_accel: float


class InteractionSeries(Sequence[InteractionSample]):
    """Array-backed ordered sequence of InteractionSamples for one LV-SV pair."""

    __slots__ = ("t", "gap_long", "gap_lat", "overlap", "rel_vel",
                 "sv_speed", "lv_speed", "sv_accel")

    def __init__(self, t, gap_long, gap_lat, overlap, rel_vel,
                 sv_speed, lv_speed, sv_accel):
        self.t = _readonly(t)
        self.gap_long = _readonly(gap_long)
        self.gap_lat = _readonly(gap_lat)
        self.overlap = _readonly(overlap)
        self.rel_vel = _readonly(rel_vel)
        self.sv_speed = _readonly(sv_speed)
        self.lv_speed = _readonly(lv_speed)
        self.sv_accel = _readonly(sv_accel)

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return InteractionSeries(*(getattr(self, name)[i] for name in self.__slots__))
        return InteractionSample(*(float(getattr(self, name)[i]) for name in self.__slots__))

    def __iter__(self) -> Iterator[InteractionSample]:
        for i in range(len(self)):
            yield self[i]


def lateral_overlap(lv_y: float, lv_width: float, sv_y: float, sv_width: float) -> float:
    """Intersection length of the two lateral width extents, >= 0."""
    if lv_width <= 0 or sv_width <= 0:
        raise ValueError("widths must be positive")
    right = min(lv_y + lv_width / 2.0, sv_y + sv_width / 2.0)
    left = max(lv_y - lv_width / 2.0, sv_y - sv_width / 2.0)
    return max(0.0, right - left)


def _overlap_arrays(lv_y: np.ndarray, lv_width: float, sv_y: np.ndarray, sv_width: float) -> np.ndarray:
    right = np.minimum(lv_y + lv_width / 2.0, sv_y + sv_width / 2.0)
    left = np.maximum(lv_y - lv_width / 2.0, sv_y - sv_width / 2.0)
    return np.maximum(0.0, right - left)


def interaction_series(lv: Vehicle, sv: Vehicle, window: tuple[float, float]) -> InteractionSeries:
    """Per-instant interaction quantities for LV-SV over ``window`` = [t0, t1].

    Both vehicles must cover every grid instant of the window.
    """
    if lv.dt != sv.dt:
        raise ValueError("LV and SV are not on the same grid")
    dt = lv.dt
    t0, t1 = window
    ka = round(t0 / dt)
    kb = round(t1 / dt)
    if abs(ka * dt - t0) > GRID_EPS or abs(kb * dt - t1) > GRID_EPS:
        raise ValueError(f"window {window} is not aligned to the dt={dt} grid")
    for k in (ka, kb):
        for veh in (lv, sv):
            if not 0 <= k - veh.k0 < len(veh):
                raise ValueError(
                    f"vehicle {veh.id} does not cover t={k * dt} in window {window}"
                )
    la, lb = ka - lv.k0, kb - lv.k0
    sa, sb = ka - sv.k0, kb - sv.k0
    lv_x = lv.x_long[la:lb + 1]
    sv_x = sv.x_long[sa:sb + 1]
    lv_y = lv.y_lat[la:lb + 1]
    sv_y = sv.y_lat[sa:sb + 1]
    return InteractionSeries(
        t=(ka + np.arange(kb - ka + 1)) * dt,
        gap_long=(lv_x - lv.length) - sv_x,
        gap_lat=sv_y - lv_y,
        overlap=_overlap_arrays(lv_y, lv.width, sv_y, sv.width),
        rel_vel=lv.v_long[la:lb + 1] - sv.v_long[sa:sb + 1],
        sv_speed=sv.v_long[sa:sb + 1],
        lv_speed=lv.v_long[la:lb + 1],
        sv_accel=sv.a_long[sa:sb + 1],
    )


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

REQUIRED_COLUMNS = ("id", "class", "t", "x_long", "y_lat")
OPTIONAL_COLUMNS = ("v_long", "v_lat", "a_long", "a_lat", "length", "width")


class ConfigError(ValueError):
    """Fatal configuration problem (e.g. unmappable required column)."""


@dataclass
class IngestResult:
    vehicles: list[Vehicle]
    record_errors: list[tuple[int, str]] = field(default_factory=list)
    vehicle_errors: list[tuple[str, str]] = field(default_factory=list)

    def by_id(self) -> dict[str, Vehicle]:
        return {v.id: v for v in self.vehicles}


def _central_diff(y: np.ndarray, dt: float) -> np.ndarray:
    """First derivative: central differences, one-sided at the endpoints."""
    n = len(y)
    if n == 1:
        return np.zeros(1)
    d = np.empty(n)
    d[1:-1] = (y[2:] - y[:-2]) / (2.0 * dt)
    d[0] = (y[1] - y[0]) / dt
    d[-1] = (y[-1] - y[-2]) / dt
    return d


def _second_diff(y: np.ndarray, dt: float) -> np.ndarray:
    """Second derivative: central second differences, one-sided at endpoints."""
    n = len(y)
    if n < 3:
        return np.zeros(n)
    d = np.empty(n)
    d[1:-1] = (y[2:] - 2.0 * y[1:-1] + y[:-2]) / (dt * dt)
    d[0] = d[1]
    d[-1] = d[-2]
    return d


def _resample(t: np.ndarray, cols: dict[str, np.ndarray], dt: float) -> tuple[int, dict[str, np.ndarray]]:
    """Linear interpolation of all columns onto the integer dt grid."""
    k0 = math.ceil(t[0] / dt - GRID_EPS)
    k1 = math.floor(t[-1] / dt + GRID_EPS)
    if k1 < k0:
        raise ValueError("trajectory spans no grid instant")
    grid = (k0 + np.arange(k1 - k0 + 1)) * dt
    on_grid = len(grid) == len(t) and np.allclose(grid, t, rtol=0.0, atol=GRID_EPS)
    out = {}
    for name, vals in cols.items():
        out[name] = vals.copy() if on_grid else np.interp(grid, t, vals)
    return k0, out


def ingest(
    source: str | IO[str],
    mapping: Mapping[str, str],
    dt: float,
    class_dims: Mapping[str, tuple[float, float]] | None = None,
) -> IngestResult:
    """Read a trajectory CSV into Vehicles on the common dt grid.

    ``mapping`` maps logical names (id, class, t, x_long, y_lat, and the
    optional v_long/v_lat/a_long/a_lat/length/width) to CSV headers. Missing
    velocity/acceleration columns are synthesized by finite differences;
    missing dimensions come from ``class_dims`` = {class tag: (length, width)}.

    Malformed rows and unknown class tags are collected as record errors with
    their row numbers; vehicles with conflicting duplicate timestamps are
    dropped with a vehicle error. An unmappable required column raises
    ConfigError.
    """
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    for req in REQUIRED_COLUMNS:
        if req not in mapping:
            raise ConfigError(f"required column '{req}' missing from mapping")
    class_dims = class_dims or {}

    close_after = False
    if isinstance(source, str):
        handle: IO[str] = open(source, newline="")
        close_after = True
    else:
        handle = source

    per_vehicle: dict[str, dict[str, list]] = {}
    record_errors: list[tuple[int, str]] = []
    try:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise ConfigError("input CSV has no header row")
        header = set(reader.fieldnames)
        for logical, col in mapping.items():
            if col not in header:
                if logical in REQUIRED_COLUMNS:
                    raise ConfigError(f"mapped column '{col}' for '{logical}' not in CSV header")
                record_errors.append((0, f"optional column '{col}' not in header; ignored"))
        present = {
            logical: col
            for logical, col in mapping.items()
            if col in header
        }

        for rownum, row in enumerate(reader, start=2):
            tag = (row[present["class"]] or "").strip()
            try:
                vclass = VehicleClass(tag)
            except ValueError:
                record_errors.append((rownum, f"unknown class '{tag}'"))
                continue
            try:
                rec = {
                    "t": float(row[present["t"]]),
                    "x_long": float(row[present["x_long"]]),
                    "y_lat": float(row[present["y_lat"]]),
                }
                for opt in OPTIONAL_COLUMNS:
                    if opt in present:
                        rec[opt] = float(row[present[opt]])
            except (TypeError, ValueError) as exc:
                record_errors.append((rownum, f"unparseable numeric field: {exc}"))
                continue
            vid = str(row[present["id"]]).strip()
            bucket = per_vehicle.setdefault(vid, {"class": vclass, "rows": []})
            if bucket["class"] is not vclass:
                record_errors.append((rownum, f"vehicle {vid}: conflicting class '{tag}'"))
                continue
            bucket["rows"].append(rec)
    finally:
        if close_after:
            handle.close()

    vehicles: list[Vehicle] = []
    vehicle_errors: list[tuple[str, str]] = []
    for vid in sorted(per_vehicle):
        vclass = per_vehicle[vid]["class"]
        rows = sorted(per_vehicle[vid]["rows"], key=lambda r: r["t"])
        if not rows:
            continue
        # Drop exact duplicate timestamps; conflicting duplicates are an error.
        dedup: list[dict] = []
        conflict = False
        for rec in rows:
            if dedup and abs(rec["t"] - dedup[-1]["t"]) <= GRID_EPS:
                if abs(rec["x_long"] - dedup[-1]["x_long"]) > GRID_EPS:
                    conflict = True
                    break
                continue
            dedup.append(rec)
        if conflict:
            vehicle_errors.append((vid, "non-monotonic timestamps after de-duplication"))
            continue

        t = np.array([r["t"] for r in dedup])
        cols = {"x_long": np.array([r["x_long"] for r in dedup]),
                "y_lat": np.array([r["y_lat"] for r in dedup])}
        for opt in ("v_long", "v_lat", "a_long", "a_lat"):
            if opt in dedup[0]:
                cols[opt] = np.array([r[opt] for r in dedup])
        try:
            k0, grid_cols = _resample(t, cols, dt)
        except ValueError as exc:
            vehicle_errors.append((vid, str(exc)))
            continue

        if "v_long" not in grid_cols:
            grid_cols["v_long"] = _central_diff(grid_cols["x_long"], dt)
        if "v_lat" not in grid_cols:
            grid_cols["v_lat"] = _central_diff(grid_cols["y_lat"], dt)
        if "a_long" not in grid_cols:
            if "v_long" in cols:
                grid_cols["a_long"] = _central_diff(grid_cols["v_long"], dt)
            else:
                grid_cols["a_long"] = _second_diff(grid_cols["x_long"], dt)
        if "a_lat" not in grid_cols:
            if "v_lat" in cols:
                grid_cols["a_lat"] = _central_diff(grid_cols["v_lat"], dt)
            else:
                grid_cols["a_lat"] = _second_diff(grid_cols["y_lat"], dt)
        grid_cols["v_long"] = np.maximum(grid_cols["v_long"], 0.0)

        length = dedup[0].get("length")
        width = dedup[0].get("width")
        if length is None or width is None:
            default = class_dims.get(vclass.value)
            if default is None:
                vehicle_errors.append((vid, f"no dimensions and no default for class {vclass.value}"))
                continue
            length = length if length is not None else default[0]
            width = width if width is not None else default[1]

        vehicles.append(Vehicle(
            id=vid, vclass=vclass, length=float(length), width=float(width),
            dt=dt, k0=k0,
            x_long=grid_cols["x_long"], y_lat=grid_cols["y_lat"],
            v_long=grid_cols["v_long"], v_lat=grid_cols["v_lat"],
            a_long=grid_cols["a_long"], a_lat=grid_cols["a_lat"],
        ))

    return IngestResult(vehicles=vehicles, record_errors=record_errors,
                        vehicle_errors=vehicle_errors)
