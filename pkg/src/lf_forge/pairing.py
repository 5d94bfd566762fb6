"""Base leader-follower pair extraction.

A leader is resolved per subject vehicle (SV) at every grid instant: among
vehicles strictly ahead (non-negative bumper-to-bumper gap) with positive
lateral overlap and gap within the longitudinal threshold, the one with the
smallest gap wins. Maximal runs of a constant leader id that last at least
the minimum duration become candidate pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .trajmodel import (
    SIZE_RANK,
    InteractionSeries,
    Vehicle,
    VehicleClass,
    interaction_series,
)


class DuplicateRule(Enum):
    CLOSEST_GAP = "closest_gap"


@dataclass(frozen=True)
class PairingCriteria:
    max_gap: float = 30.0        # meters
    require_overlap: bool = True
    min_duration: float = 5.0    # seconds
    duplicate_rule: DuplicateRule = DuplicateRule.CLOSEST_GAP

    def __post_init__(self) -> None:
        if self.max_gap <= 0:
            raise ValueError(f"max_gap must be positive, got {self.max_gap}")
        if self.min_duration <= 0:
            raise ValueError(f"min_duration must be positive, got {self.min_duration}")


@dataclass(frozen=True)
class VehicleState:
    """One vehicle's geometry at a single instant, for leader resolution."""

    id: str
    x_front: float
    length: float
    y_lat: float
    width: float


@dataclass(frozen=True)
class CandidatePair:
    """One LV-SV pairing over a contiguous window of the common grid.

    The id is fixed at extraction and survives trimming, so ledger entries
    keep referring to the same pair as its window shrinks.
    """

    lv: Vehicle
    sv: Vehicle
    window: tuple[float, float]
    samples: InteractionSeries
    pid: str | None = None

    @property
    def pair_id(self) -> str:
        return self.pid or f"{self.lv.id}-{self.sv.id}-{self.window[0]:.1f}"

    @property
    def category(self) -> tuple[VehicleClass, VehicleClass]:
        return (self.lv.vclass, self.sv.vclass)

    @property
    def category_tag(self) -> str:
        return f"{self.lv.vclass.value}-{self.sv.vclass.value}"

    @property
    def duration(self) -> float:
        return self.window[1] - self.window[0]

    def with_samples(self, samples: InteractionSeries) -> "CandidatePair":
        return CandidatePair(
            lv=self.lv, sv=self.sv,
            window=(float(samples.t[0]), float(samples.t[-1])),
            samples=samples,
            pid=self.pair_id,
        )


def _resolve_index(
    sv_index: int,
    ids: Sequence[str],
    x_front: np.ndarray,
    lengths: np.ndarray,
    y_lat: np.ndarray,
    widths: np.ndarray,
    criteria: PairingCriteria,
) -> int | None:
    gaps = (x_front - lengths) - x_front[sv_index]
    mask = (gaps >= 0.0) & (gaps <= criteria.max_gap)
    mask[sv_index] = False
    if criteria.require_overlap:
        right = np.minimum(y_lat + widths / 2.0, y_lat[sv_index] + widths[sv_index] / 2.0)
        left = np.maximum(y_lat - widths / 2.0, y_lat[sv_index] - widths[sv_index] / 2.0)
        mask &= (right - left) > 0.0
    cand = np.flatnonzero(mask)
    if cand.size == 0:
        return None
    best = gaps[cand].min()
    ties = cand[gaps[cand] == best]
    if ties.size == 1:
        return int(ties[0])
    return int(min(ties, key=lambda j: ids[j]))


def resolve_leader(
    sv: VehicleState,
    frame: Sequence[VehicleState],
    criteria: PairingCriteria,
) -> str | None:
    """Id of the most influential leader for ``sv`` in ``frame``, or None.

    Candidates are strictly ahead (gap >= 0, no bumper interpenetration),
    laterally overlapping when required, and within ``max_gap``. The closest
    gap wins; ties break to the smaller vehicle id for determinism.
    """
    states = list(frame)
    try:
        sv_index = next(i for i, s in enumerate(states) if s.id == sv.id)
    except StopIteration:
        raise ValueError(f"frame does not contain SV {sv.id}")
    j = _resolve_index(
        sv_index,
        [s.id for s in states],
        np.array([s.x_front for s in states]),
        np.array([s.length for s in states]),
        np.array([s.y_lat for s in states]),
        np.array([s.width for s in states]),
        criteria,
    )
    return None if j is None else states[j].id


def extract_pairs(
    vehicles: list[Vehicle],
    criteria: PairingCriteria,
    dt: float,
) -> list[CandidatePair]:
    """All candidate pairs from per-instant leader resolution.

    For each SV the per-instant leader ids are segmented into maximal runs of
    a constant id; a run of n samples has duration (n-1)*dt and becomes a
    CandidatePair when that duration reaches ``min_duration``. A leader
    change or an instant with no resolved leader terminates a run. Output is
    sorted by (sv id, window start).
    """
    if not vehicles:
        return []
    by_id = {v.id: v for v in vehicles}

    frames: dict[int, list[Vehicle]] = {}
    for v in sorted(vehicles, key=lambda v: v.id):
        for k in range(v.k0, v.k0 + len(v)):
            frames.setdefault(k, []).append(v)

    leaders: dict[str, dict[int, str]] = {v.id: {} for v in vehicles}
    for k, members in frames.items():
        if len(members) < 2:
            continue
        ids = [v.id for v in members]
        x = np.array([v.x_long[k - v.k0] for v in members])
        y = np.array([v.y_lat[k - v.k0] for v in members])
        lens = np.array([v.length for v in members])
        wids = np.array([v.width for v in members])
        for i, vid in enumerate(ids):
            j = _resolve_index(i, ids, x, lens, y, wids, criteria)
            if j is not None:
                leaders[vid][k] = ids[j]

    min_run = int(round(criteria.min_duration / dt)) + 1  # (n-1)*dt >= min_duration
    pairs: list[CandidatePair] = []
    for sv in vehicles:
        run_leader: str | None = None
        run_start = sv.k0
        for k in range(sv.k0, sv.k0 + len(sv) + 1):  # one past the end flushes the run
            lid = leaders[sv.id].get(k) if k < sv.k0 + len(sv) else None
            if lid == run_leader and lid is not None:
                continue
            if run_leader is not None and (k - run_start) >= min_run:
                lv = by_id[run_leader]
                window = (run_start * dt, (k - 1) * dt)
                pairs.append(CandidatePair(
                    lv=lv, sv=sv, window=window,
                    samples=interaction_series(lv, sv, window),
                    pid=f"{lv.id}-{sv.id}-{window[0]:.1f}",
                ))
            run_leader = lid
            run_start = k
    pairs.sort(key=lambda p: (p.sv.id, p.window[0]))
    return pairs


class Asymmetry(Enum):
    SYMMETRIC = "symmetric"
    POSITIVE = "positive"  # LV larger than SV
    NEGATIVE = "negative"  # LV smaller than SV


def asymmetry(lv_class: VehicleClass, sv_class: VehicleClass) -> Asymmetry:
    if SIZE_RANK[lv_class] == SIZE_RANK[sv_class]:
        return Asymmetry.SYMMETRIC
    return Asymmetry.POSITIVE if SIZE_RANK[lv_class] > SIZE_RANK[sv_class] else Asymmetry.NEGATIVE


@dataclass(frozen=True)
class CategorySummary:
    lv_class: VehicleClass
    sv_class: VehicleClass
    n_pairs: int
    n_points: int
    asymmetry: Asymmetry
    modelable: bool

    @property
    def tag(self) -> str:
        return f"{self.lv_class.value}-{self.sv_class.value}"


@dataclass
class PairSummary:
    categories: list[CategorySummary] = field(default_factory=list)

    @property
    def total_pairs(self) -> int:
        return sum(c.n_pairs for c in self.categories)

    @property
    def modelable(self) -> list[CategorySummary]:
        return [c for c in self.categories if c.modelable]


def summarize_pairs(pairs: list[CandidatePair], min_pairs: int = 20) -> PairSummary:
    """Per-category pair/point counts with asymmetry tags.

    Categories with at least ``min_pairs`` pairs are flagged modelable.
    """
    counts: dict[tuple[VehicleClass, VehicleClass], list[int]] = {}
    for p in pairs:
        cell = counts.setdefault(p.category, [0, 0])
        cell[0] += 1
        cell[1] += len(p.samples)
    summary = PairSummary()
    for (lv_c, sv_c) in sorted(counts, key=lambda c: (c[1].value, c[0].value)):
        n_pairs, n_points = counts[(lv_c, sv_c)]
        summary.categories.append(CategorySummary(
            lv_class=lv_c, sv_class=sv_c,
            n_pairs=n_pairs, n_points=n_points,
            asymmetry=asymmetry(lv_c, sv_c),
            modelable=n_pairs >= min_pairs,
        ))
    return summary
