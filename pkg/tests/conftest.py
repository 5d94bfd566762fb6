from __future__ import annotations

import numpy as np
import pytest

from lf_forge.pairing import CandidatePair
from lf_forge.trajmodel import Vehicle, VehicleClass, interaction_series


def make_vehicle(
    vid: str,
    x_long: np.ndarray,
    y_lat=0.0,
    v_long=None,
    a_long=None,
    v_lat=None,
    dt: float = 0.5,
    k0: int = 0,
    vclass: VehicleClass = VehicleClass.CAR,
    length: float = 4.0,
    width: float = 1.8,
) -> Vehicle:
    x_long = np.asarray(x_long, dtype=float)
    n = len(x_long)

    def series(val, default=0.0):
        if val is None:
            return np.full(n, default)
        arr = np.asarray(val, dtype=float)
        return np.full(n, float(arr)) if arr.ndim == 0 else arr

    return Vehicle(
        id=vid, vclass=vclass, length=length, width=width, dt=dt, k0=k0,
        x_long=x_long,
        y_lat=series(y_lat),
        v_long=series(v_long, 10.0),
        v_lat=series(v_lat),
        a_long=series(a_long),
        a_lat=np.zeros(n),
    )


def make_pair(
    gap: np.ndarray,
    sv_speed=8.0,
    rel_vel=0.0,
    gap_lat=0.0,
    sv_accel=0.0,
    dt: float = 0.5,
    vclass: VehicleClass = VehicleClass.CAR,
    length: float = 4.0,
    width: float = 1.8,
    ids: tuple[str, str] = ("LV", "SV"),
) -> CandidatePair:
    """Pair whose interaction series realizes the given per-sample arrays."""
    gap = np.asarray(gap, dtype=float)
    n = len(gap)

    def series(val):
        arr = np.asarray(val, dtype=float)
        return np.full(n, float(arr)) if arr.ndim == 0 else arr

    sv_speed = series(sv_speed)
    rel_vel = series(rel_vel)
    gap_lat = series(gap_lat)
    sv_accel = series(sv_accel)
    x_sv = np.arange(n) * 5.0
    sv = make_vehicle(ids[1], x_sv, y_lat=np.zeros(n), v_long=sv_speed,
                      a_long=sv_accel, dt=dt, vclass=vclass, length=length, width=width)
    lv = make_vehicle(ids[0], x_sv + gap + length, y_lat=-gap_lat,
                      v_long=sv_speed + rel_vel, dt=dt, vclass=vclass,
                      length=length, width=width)
    window = (0.0, (n - 1) * dt)
    return CandidatePair(lv=lv, sv=sv, window=window,
                         samples=interaction_series(lv, sv, window),
                         pid=f"{ids[0]}-{ids[1]}-0.0")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
