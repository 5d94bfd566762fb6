from __future__ import annotations

import math

import numpy as np
import pytest

from lf_forge.wavecorr import (
    EnergyProfile,
    LagMode,
    MatchResult,
    WaveletConfig,
    cwt_energy,
    mexican_hat,
    peak_match,
)

DT = 0.5


def dense_oracle_energy(x: np.ndarray, dt: float, scale: float) -> np.ndarray:
    """Independent dense convolution: W(t) = sum_k x_k psi((t_k - t)/a) dt/sqrt(a),
    summed over every sample with no kernel truncation."""
    n = len(x)
    t = np.arange(n) * dt
    w = np.zeros(n)
    for i in range(n):
        u = (t - t[i]) / scale
        w[i] = np.sum(x * mexican_hat(u)) * dt / math.sqrt(scale)
    return w ** 2


class TestKernel:
    def test_value_at_zero(self):
        assert mexican_hat(0.0) == pytest.approx(2.0 / (math.sqrt(3.0) * math.pi ** 0.25), abs=1e-12)
        assert mexican_hat(0.0) == pytest.approx(0.8673, abs=5e-5)

    def test_roots_at_unit(self):
        assert mexican_hat(1.0) == pytest.approx(0.0, abs=1e-15)
        assert mexican_hat(-1.0) == pytest.approx(0.0, abs=1e-15)

    def test_even(self):
        u = np.linspace(0, 6, 40)
        assert np.allclose(mexican_hat(u), mexican_hat(-u))

    def test_zero_mean_by_quadrature(self):
        # Trapezoid-rule oracle over [-8, 8].
        u = np.linspace(-8.0, 8.0, 20001)
        integral = np.trapezoid(mexican_hat(u), u)
        assert abs(integral) < 1e-6


class TestEnergy:
    def test_constant_series_annihilated(self):
        prof = cwt_energy(np.full(80, 7.3), DT, WaveletConfig())
        assert np.all(prof.energy < 1e-9)
        assert prof.peaks == ()

    def test_step_peak_at_step_location(self):
        # A discrete jump localizes at the sampling-interval scale; the
        # energy flanks of coarser scales sit at +-scale from the jump.
        cfg = WaveletConfig(scales=(DT,))
        n = 80
        step_at = 20  # t = 10 s
        x = np.where(np.arange(n) >= step_at, 12.0, 8.0)
        prof = cwt_energy(x, DT, cfg)
        assert abs(int(np.argmax(prof.energy)) - step_at) <= 1
        oracle = dense_oracle_energy(x - x.mean(), DT, DT)
        assert abs(int(np.argmax(oracle)) - int(np.argmax(prof.energy))) <= 1

    def test_linear_ramp_interior_annihilated(self):
        cfg = WaveletConfig(scales=(1.0, 2.0))
        x = np.linspace(0.0, 10.0, 120)
        prof = cwt_energy(x, DT, cfg)
        edge = int(math.ceil(2.0 / DT)) + len(_kernel_span(2.0))  # beyond kernel reach
        interior = prof.energy[edge:-edge]
        assert np.all(interior < 1e-6)
        oracle = dense_oracle_energy(x - x.mean(), DT, 2.0)
        assert np.all(oracle[edge:-edge] < 1e-6)

    def test_energy_matches_dense_oracle_in_interior(self, rng):
        cfg = WaveletConfig(scales=(1.5,))
        x = rng.normal(10.0, 1.0, 90)
        prof = cwt_energy(x, DT, cfg)
        oracle = dense_oracle_energy(x - x.mean(), DT, 1.5)
        # Truncation only matters within the kernel span of the edges.
        # The implementation's zero-mean tap correction perturbs the pure
        # formula at ~1e-4 relative; agreement beyond that is truncation-free.
        span = len(_kernel_span(1.5))
        assert np.allclose(prof.energy[span:-span], oracle[span:-span], rtol=2e-3, atol=1e-6)

    def test_constant_offset_invariance(self, rng):
        cfg = WaveletConfig()
        x = rng.normal(0.0, 1.5, 100)
        a = cwt_energy(x, DT, cfg)
        b = cwt_energy(x + 300.0, DT, cfg)
        assert np.allclose(a.energy, b.energy, rtol=1e-6, atol=1e-12)

    def test_shift_equivariance_on_interior(self):
        # An integer-valued compact bump shifted by m samples: the two series
        # hold the same multiset of exactly-summable values in the same
        # relative order, so they demean identically and interior energy must
        # shift exactly, bit for bit.
        cfg = WaveletConfig(scales=(1.0, 2.0))
        n, m = 120, 6
        bump = np.zeros(n)
        bump[40:47] = [1.0, 3.0, 7.0, 9.0, 7.0, 3.0, 1.0]
        shifted = np.zeros(n)
        shifted[40 + m:47 + m] = bump[40:47]
        base = cwt_energy(bump, DT, cfg).energy
        moved = cwt_energy(shifted, DT, cfg).energy
        span = len(_kernel_span(2.0)) + m
        assert np.array_equal(moved[span + m:n - span], base[span:n - span - m])

    def test_too_short_series_rejected(self):
        with pytest.raises(ValueError, match="shorter"):
            cwt_energy(np.ones(10), DT, WaveletConfig(scales=(4.0,)))

    def test_peak_prominence_filtering(self):
        t = np.arange(200) * DT
        big = 3.0 * np.exp(-((t - 30.0) ** 2) / 2.0)
        tiny = 0.02 * np.exp(-((t - 70.0) ** 2) / 2.0)
        prof = cwt_energy(10.0 + big + tiny, DT, WaveletConfig(scales=(1.0, 2.0)))
        assert any(abs(p - 30.0) <= 1.0 for p in prof.peaks)
        assert not any(abs(p - 70.0) <= 1.0 for p in prof.peaks)


def _kernel_span(scale: float) -> range:
    return range(int(math.ceil(5.0 * scale / DT)))


def _bumpy_profile(centers, n=160, amp=2.0):
    t = np.arange(n) * DT
    x = np.full(n, 9.0)
    for c in centers:
        x = x + amp * np.exp(-((t - c) ** 2) / 2.0)
    return x


class TestPeakMatch:
    def test_delayed_by_one_second_matches(self):
        cfg = WaveletConfig()
        lv = cwt_energy(_bumpy_profile([20.0, 50.0]), DT, cfg)
        sv = cwt_energy(_bumpy_profile([21.0, 51.0]), DT, cfg)
        result = peak_match(lv, sv, cfg)
        assert result.matched
        assert result.count >= len(lv.peaks)
        assert all(0.0 <= b - a <= cfg.max_lag for a, b in result.pairs)

    def test_delayed_by_four_seconds_fails(self):
        cfg = WaveletConfig()
        lv = cwt_energy(_bumpy_profile([30.0]), DT, cfg)
        sv = cwt_energy(_bumpy_profile([34.0]), DT, cfg)
        result = peak_match(lv, sv, cfg)
        assert result.count == 0 and not result.matched

    def test_no_leader_peaks_no_match(self):
        cfg = WaveletConfig()
        lv = cwt_energy(np.full(160, 9.0), DT, cfg)
        sv = cwt_energy(_bumpy_profile([30.0]), DT, cfg)
        result = peak_match(lv, sv, cfg)
        assert result == MatchResult(matched=False, count=0, pairs=())

    def test_causal_mode_rejects_leading_sv(self):
        cfg = WaveletConfig()
        lv = cwt_energy(_bumpy_profile([30.0]), DT, cfg)
        sv = cwt_energy(_bumpy_profile([29.0]), DT, cfg)
        assert not peak_match(lv, sv, cfg).matched
        symmetric = WaveletConfig(lag_mode=LagMode.SYMMETRIC)
        assert peak_match(lv, sv, symmetric).matched

    def test_each_peak_used_once(self):
        cfg = WaveletConfig()
        lv = EnergyProfile(t=np.arange(10.0), energy=np.zeros(10), peaks=(1.0, 1.5), peak_indices=())
        sv = EnergyProfile(t=np.arange(10.0), energy=np.zeros(10), peaks=(2.0,), peak_indices=())
        result = peak_match(lv, sv, cfg)
        assert result.count == 1
        assert result.pairs == ((1.0, 2.0),)

    def test_monotone_in_max_lag(self, rng):
        for _ in range(100):
            lv_peaks = tuple(sorted(rng.uniform(0, 50, rng.integers(0, 8))))
            sv_peaks = tuple(sorted(rng.uniform(0, 50, rng.integers(0, 8))))
            lv = EnergyProfile(t=np.arange(4.0), energy=np.zeros(4), peaks=lv_peaks, peak_indices=())
            sv = EnergyProfile(t=np.arange(4.0), energy=np.zeros(4), peaks=sv_peaks, peak_indices=())
            prev = -1
            for lag in (0.5, 1.0, 2.0, 4.0, 8.0):
                count = peak_match(lv, sv, WaveletConfig(max_lag=lag)).count
                assert count >= prev
                prev = count

    def test_min_matches_monotone(self):
        cfg2 = WaveletConfig(min_matches=2)
        cfg1 = WaveletConfig(min_matches=1)
        lv = cwt_energy(_bumpy_profile([20.0, 50.0]), DT, cfg1)
        sv = cwt_energy(_bumpy_profile([21.0, 51.0]), DT, cfg1)
        if peak_match(lv, sv, cfg2).matched:
            assert peak_match(lv, sv, cfg1).matched

    def test_config_validation(self):
        with pytest.raises(ValueError):
            WaveletConfig(scales=())
        with pytest.raises(ValueError):
            WaveletConfig(max_lag=-1.0)
        with pytest.raises(ValueError):
            WaveletConfig(min_matches=0)
        with pytest.raises(ValueError):
            WaveletConfig(prominence_frac=0.0)
        with pytest.raises(ValueError):
            WaveletConfig(lag_mode="sideways")
