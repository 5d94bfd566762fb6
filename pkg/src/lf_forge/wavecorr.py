"""Mexican-hat wavelet energy of speed profiles and lagged peak matching.

The kernel is the normalized second derivative of a Gaussian,
psi(u) = 2/(sqrt(3)*pi^(1/4)) * (1 - u^2) * exp(-u^2/2). Energy at an
instant is the sum over scales of the squared wavelet coefficient. Speed
profiles are demeaned before transforming and the discrete kernel taps are
zero-mean corrected, so constant speed yields exactly zero energy and
time-shifted inputs produce exactly shifted interior energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

MEXICAN_HAT_NORM = 2.0 / (math.sqrt(3.0) * math.pi ** 0.25)
KERNEL_SUPPORT_SCALES = 5.0  # kernel truncated at |u| = 5; psi(5) ~ 9e-5


class LagMode:
    CAUSAL = "causal"        # SV peak at or after the LV peak
    SYMMETRIC = "symmetric"  # either direction within max_lag


@dataclass(frozen=True)
class WaveletConfig:
    scales: tuple[float, ...] = (1.0, 2.0, 4.0)  # seconds
    max_lag: float = 2.0                         # seconds
    min_matches: int = 1
    prominence_frac: float = 0.1
    lag_mode: str = LagMode.CAUSAL

    def __post_init__(self) -> None:
        if not self.scales or any(a <= 0 for a in self.scales):
            raise ValueError(f"scales must be positive, got {self.scales}")
        if self.max_lag < 0:
            raise ValueError(f"max_lag must be >= 0, got {self.max_lag}")
        if self.min_matches < 1:
            raise ValueError(f"min_matches must be >= 1, got {self.min_matches}")
        if not 0.0 < self.prominence_frac <= 1.0:
            raise ValueError(f"prominence_frac must be in (0, 1], got {self.prominence_frac}")
        if self.lag_mode not in (LagMode.CAUSAL, LagMode.SYMMETRIC):
            raise ValueError(f"unknown lag_mode {self.lag_mode!r}")


@dataclass(frozen=True)
class EnergyProfile:
    t: np.ndarray       # grid times, seconds
    energy: np.ndarray  # >= 0 per instant
    peaks: tuple[float, ...]       # peak times
    peak_indices: tuple[int, ...]

    def __post_init__(self) -> None:
        for name in ("t", "energy"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class MatchResult:
    matched: bool
    count: int
    pairs: tuple[tuple[float, float], ...]  # (t_lv, t_sv) matched peak times


def mexican_hat(u):
    """Normalized Mexican hat wavelet; even, zero-mean, maximal at u=0."""
    u = np.asarray(u, dtype=float)
    val = MEXICAN_HAT_NORM * (1.0 - u ** 2) * np.exp(-(u ** 2) / 2.0)
    return float(val) if val.ndim == 0 else val


def _kernel(scale: float, dt: float) -> np.ndarray:
    """Discrete taps psi(j*dt/a)*dt/sqrt(a), zero-mean corrected."""
    half = int(math.ceil(KERNEL_SUPPORT_SCALES * scale / dt))
    offsets = np.arange(-half, half + 1)
    taps = mexican_hat(offsets * dt / scale) * dt / math.sqrt(scale)
    return taps - taps.mean()


def _truncated_convolve(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Correlation of x with symmetric taps, truncated at the series edges."""
    half = (len(taps) - 1) // 2
    full = np.convolve(x, taps[::-1], mode="full")  # taps even, reversal for clarity
    return full[half:half + len(x)]


def cwt_energy(speed: np.ndarray, dt: float, cfg: WaveletConfig, t0: float = 0.0) -> EnergyProfile:
    """Summed squared wavelet coefficients of a speed series on the dt grid.

    The series is demeaned first, so the result is exactly invariant under
    adding a constant speed. Peaks are energy local maxima with prominence at
    least ``prominence_frac`` of the global maximum; the outer ceil(a_max/dt)
    samples per side are excluded from peak detection to avoid boundary
    artifacts.
    """
    x = np.asarray(speed, dtype=float)
    n = len(x)
    max_scale = max(cfg.scales)
    required = int(math.ceil(2.0 * max_scale / dt))
    if n < required:
        raise ValueError(
            f"series of {n} samples is shorter than the {required} required "
            f"for scale {max_scale} s at dt={dt}"
        )
    x = x - x.mean()
    energy = np.zeros(n)
    for scale in cfg.scales:
        w = _truncated_convolve(x, _kernel(scale, dt))
        energy += w ** 2

    edge = int(math.ceil(max_scale / dt))
    peak_idx: tuple[int, ...] = ()
    e_max = float(energy.max(initial=0.0))
    if e_max > 0.0 and n > 2 * edge + 2:
        interior = energy[edge:n - edge]
        idx, _ = find_peaks(interior, prominence=cfg.prominence_frac * e_max)
        peak_idx = tuple(int(i) + edge for i in idx)

    t = t0 + np.arange(n) * dt
    return EnergyProfile(
        t=t,
        energy=energy,
        peaks=tuple(float(t[i]) for i in peak_idx),
        peak_indices=peak_idx,
    )


def peak_match(lv: EnergyProfile, sv: EnergyProfile, cfg: WaveletConfig) -> MatchResult:
    """Greedy chronological matching of LV energy peaks to lagged SV peaks.

    Each LV peak is matched to the earliest unmatched SV peak whose lag
    t_sv - t_lv lies in [0, max_lag] (causal mode) or [-max_lag, max_lag]
    (symmetric mode). Each peak is used at most once; the pair matches when
    the count reaches ``min_matches``.
    """
    lo = -cfg.max_lag if cfg.lag_mode == LagMode.SYMMETRIC else 0.0
    hi = cfg.max_lag
    sv_peaks = list(sv.peaks)
    used = [False] * len(sv_peaks)
    pairs: list[tuple[float, float]] = []
    start = 0
    for t_lv in lv.peaks:
        for j in range(start, len(sv_peaks)):
            if used[j]:
                continue
            lag = sv_peaks[j] - t_lv
            if lag < lo:
                continue
            if lag > hi:
                break
            used[j] = True
            pairs.append((t_lv, sv_peaks[j]))
            break
        while start < len(sv_peaks) and used[start]:
            start += 1
    return MatchResult(matched=len(pairs) >= cfg.min_matches, count=len(pairs), pairs=tuple(pairs))
