"""Class-wise fundamental-diagram parameters and speed-specific desirable gaps.

The congested branch of the density-speed relation gives the equilibrium
density at speed v (km/h) as k = w * k_j / (w + v); the desirable gap is its
reciprocal spacing s = 1/k = (w + v) / (w * k_j) * 1000 meters. ``w`` is the
backward wave speed (km/h) and ``k_j`` the jam density (veh/km).

Default parameters per class are back-fitted from an embedded calibration
grid of (speed, class) -> equilibrium gap, since s is affine in v:
s = 1000/k_j + 1000/(w*k_j) * v.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .trajmodel import CLASS_ORDER, VehicleClass


@dataclass(frozen=True)
class FDParams:
    """Congested-branch fundamental diagram parameters for one vehicle class."""

    vclass: VehicleClass
    w: float    # backward wave speed, km/h
    k_j: float  # jam density, veh/km

    def __post_init__(self) -> None:
        if not (self.w > 0 and np.isfinite(self.w)):
            raise ValueError(f"w must be positive and finite, got {self.w}")
        if not (self.k_j > 0 and np.isfinite(self.k_j)):
            raise ValueError(f"k_j must be positive and finite, got {self.k_j}")


@dataclass(frozen=True)
class FDFit:
    params: FDParams
    residual_rms: float


@dataclass(frozen=True)
class GapTable:
    """Desirable-gap cross table: one row per speed, one column per class."""

    speeds: tuple[float, ...]            # km/h
    classes: tuple[VehicleClass, ...]
    gaps: tuple[tuple[float, ...], ...]  # gaps[i][j]: speed i, class j, meters

    def column(self, vclass: VehicleClass) -> tuple[float, ...]:
        j = self.classes.index(vclass)
        return tuple(row[j] for row in self.gaps)


# Calibration grid pinning the per-class desirable-gap lines: equilibrium gap
# (m) at speeds 5..65 km/h in steps of 5, columns in CLASS_ORDER.
CALIBRATION_SPEEDS_KMH = tuple(float(v) for v in range(5, 70, 5))
CALIBRATION_GAPS_M: dict[VehicleClass, tuple[float, ...]] = {
    VehicleClass.TW:   (1.86, 2.90, 3.93, 4.97, 6.00, 7.04, 8.07, 9.11, 10.14, 11.18, 12.21, 13.25, 14.28),
    VehicleClass.CAR:  (6.08, 8.25, 10.42, 12.59, 14.76, 16.93, 19.10, 21.27, 23.44, 25.61, 27.78, 29.95, 32.12),
    VehicleClass.HV:   (15.08, 19.05, 23.02, 26.98, 30.95, 34.92, 38.89, 42.86, 46.83, 50.79, 54.76, 58.73, 62.70),
    VehicleClass.LCV:  (7.97, 11.03, 14.09, 17.16, 20.22, 23.28, 26.35, 29.41, 32.48, 35.54, 38.60, 41.67, 44.73),
    VehicleClass.AUTO: (4.54, 6.80, 9.07, 11.34, 13.61, 15.87, 18.14, 20.41, 22.68, 24.94, 27.21, 29.48, 31.75),
}


def density_at_speed(p: FDParams, v: float) -> float:
    """Equilibrium density (veh/km) at speed v (km/h); k_j at v=0, decreasing."""
    if v < 0:
        raise ValueError(f"speed must be non-negative, got {v}")
    return p.w * p.k_j / (p.w + v)


def desirable_gap(p: FDParams, v: float) -> float:
    """Equilibrium spacing s = 1/k (meters) at speed v (km/h); affine in v."""
    if v < 0:
        raise ValueError(f"speed must be non-negative, got {v}")
    return (p.w + v) / (p.w * p.k_j) * 1000.0


def gap_slope(p: FDParams) -> float:
    """Meters of desirable gap gained per km/h of speed: 1000/(w*k_j)."""
    return 1000.0 / (p.w * p.k_j)


def fit_fd_params(samples: Iterable[tuple[float, float]], vclass: VehicleClass = VehicleClass.CAR) -> FDFit:
    """Recover (w, k_j) from (speed km/h, gap m) samples by affine least squares.

    s = b + m*v with b = 1000/k_j and m = 1000/(w*k_j), so k_j = 1000/b and
    w = b/m. Requires at least two distinct speeds; a non-positive intercept
    or slope is rejected as non-physical.
    """
    pts = list(samples)
    v = np.array([p[0] for p in pts], dtype=float)
    s = np.array([p[1] for p in pts], dtype=float)
    if len(np.unique(v)) < 2:
        raise ValueError("need at least two distinct speeds to fit FD parameters")
    design = np.column_stack([np.ones_like(v), v])
    coef, *_ = np.linalg.lstsq(design, s, rcond=None)
    b, m = float(coef[0]), float(coef[1])
    if b <= 0 or m <= 0:
        raise ValueError(f"non-physical FD fit: intercept={b:.4g}, slope={m:.4g}")
    resid = s - design @ coef
    rms = float(np.sqrt(np.mean(resid ** 2)))
    return FDFit(params=FDParams(vclass=vclass, w=b / m, k_j=1000.0 / b), residual_rms=rms)


@lru_cache(maxsize=1)
def default_fd_params() -> dict[VehicleClass, FDParams]:
    """Per-class parameters back-fitted from the embedded calibration grid."""
    out = {}
    for vclass in CLASS_ORDER:
        samples = zip(CALIBRATION_SPEEDS_KMH, CALIBRATION_GAPS_M[vclass])
        out[vclass] = fit_fd_params(samples, vclass).params
    return out


def gap_threshold_table(
    params: Mapping[VehicleClass, FDParams],
    speeds: Sequence[float],
) -> GapTable:
    """Full (speed x class) desirable-gap table, classes in CLASS_ORDER."""
    if any(v < 0 for v in speeds):
        raise ValueError("speeds must be non-negative")
    classes = tuple(c for c in CLASS_ORDER if c in params)
    rows = tuple(
        tuple(desirable_gap(params[c], float(v)) for c in classes)
        for v in speeds
    )
    return GapTable(speeds=tuple(float(v) for v in speeds), classes=classes, gaps=rows)
