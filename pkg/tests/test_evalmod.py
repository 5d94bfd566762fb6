from __future__ import annotations

import numpy as np
import pytest

from conftest import make_pair
from lf_forge.evalmod import (
    Metrics,
    RegressionDataset,
    build_dataset,
    fit_ols,
    improvement_report,
    kfold_eval,
    metrics,
    weight_histogram,
    wlr_weights,
)


def synthetic_dataset(n=5000, beta=(0.0, 0.3, 0.1, -0.2), noise=0.1, seed=99, n_pairs=25):
    rng = np.random.default_rng(seed)
    x1 = rng.normal(0, 1.5, n)
    x2 = rng.uniform(2, 30, n)
    x3 = rng.uniform(2, 15, n)
    y = beta[0] + beta[1] * x1 + beta[2] * x2 + beta[3] * x3 + rng.normal(0, noise, n)
    pair_ids = np.array([f"P{i % n_pairs:03d}" for i in range(n)], dtype=object)
    return RegressionDataset(
        x1=x1, x2=x2, x3=x3, y=y, t=np.arange(n) * 0.5,
        pair_ids=pair_ids,
        categories=np.array(["CAR-CAR"] * n, dtype=object), tau=0.5,
    )


class TestBuildDataset:
    def test_last_sample_dropped(self):
        pair = make_pair(np.linspace(10, 20, 11))
        ds = build_dataset([pair], tau=0.5)
        assert len(ds) == 10

    def test_single_sample_pair_contributes_nothing(self):
        long_pair = make_pair(np.linspace(10, 20, 11), ids=("L1", "S1"))
        short_pair = make_pair(np.array([12.0]), ids=("L2", "S2"))
        ds = build_dataset([long_pair, short_pair], tau=0.5)
        assert len(ds) == 10
        assert set(ds.pair_ids) == {long_pair.pair_id}

    def test_response_offset_by_tau(self):
        accel = np.arange(12.0)
        pair = make_pair(np.linspace(10, 20, 12), sv_accel=accel)
        ds = build_dataset([pair], tau=1.0)  # two grid steps
        assert len(ds) == 10
        assert np.allclose(ds.y, accel[2:])
        assert np.allclose(ds.t, pair.samples.t[:10])

    def test_tau_off_grid_rejected(self):
        pair = make_pair(np.linspace(10, 20, 11))
        with pytest.raises(ValueError):
            build_dataset([pair], tau=0.3)

    def test_empty_input(self):
        assert len(build_dataset([], tau=0.5)) == 0


class TestFitOLS:
    def test_recovers_synthetic_coefficients(self):
        truth = (0.0, 0.3, 0.1, -0.2)
        fit = fit_ols(synthetic_dataset(beta=truth))
        for b_hat, b in zip(fit.beta, truth):
            assert b_hat == pytest.approx(b, abs=0.05)

    def test_constant_response_zeroes_slopes(self):
        ds = synthetic_dataset(n=200)
        const = RegressionDataset(
            x1=ds.x1, x2=ds.x2, x3=ds.x3, y=np.full(len(ds), 1.7), t=ds.t,
            pair_ids=ds.pair_ids, categories=ds.categories, tau=ds.tau,
        )
        fit = fit_ols(const)
        assert fit.beta[0] == pytest.approx(1.7, abs=1e-9)
        assert np.allclose(fit.beta[1:], 0.0, atol=1e-9)
        # Residual spread is zero, so the fit-quality metrics are undefined.
        with pytest.raises(ValueError, match="sigma_Y"):
            metrics(const.y, fit.predict(const))

    def test_duplicated_column_names_collinear_column(self):
        ds = synthetic_dataset(n=200)
        dup = RegressionDataset(
            x1=ds.x1, x2=ds.x2, x3=ds.x1.copy(), y=ds.y, t=ds.t,
            pair_ids=ds.pair_ids, categories=ds.categories, tau=ds.tau,
        )
        with pytest.raises(ValueError, match="sv_speed"):
            fit_ols(dup)

    def test_orthogonality_of_residuals(self):
        ds = synthetic_dataset(n=800)
        fit = fit_ols(ds)
        design = ds.design
        bound = 1e-8 * np.linalg.norm(design) * np.linalg.norm(ds.y)
        assert np.all(np.abs(design.T @ fit.residuals) < bound)

    def test_needs_more_rows_than_parameters(self):
        ds = synthetic_dataset(n=4)
        with pytest.raises(ValueError):
            fit_ols(ds)

    def test_pvalues_flag_irrelevant_predictor(self):
        ds = synthetic_dataset(n=4000, beta=(0.5, 0.4, 0.0, -0.3), noise=0.2)
        fit = fit_ols(ds)
        assert fit.p_values[2] > 0.01  # the dead predictor
        assert fit.p_values[1] < 1e-6
        assert fit.p_values[3] < 1e-6


class TestMetrics:
    def test_mean_predictor_baseline(self):
        rng = np.random.default_rng(5)
        y = rng.normal(3, 2, 500)
        m = metrics(y, np.full_like(y, y.mean()))
        assert m.r2 == pytest.approx(0.0, abs=1e-12)
        assert m.nrmse == pytest.approx(1.0, abs=1e-6)

    def test_perfect_predictor(self):
        y = np.linspace(-2, 2, 100)
        m = metrics(y, y.copy())
        assert m.r2 == pytest.approx(1.0)
        assert m.mae == 0.0 and m.rmse == 0.0 and m.nrmse == 0.0

    def test_adjusted_below_plain_r2(self):
        ds = synthetic_dataset(n=300, noise=0.5)
        fit = fit_ols(ds)
        m = metrics(ds.y, fit.predict(ds))
        assert m.adj_r2 <= m.r2

    def test_r2_two_ways_agree(self):
        ds = synthetic_dataset(n=600, noise=0.4)
        fit = fit_ols(ds)
        y_hat = fit.predict(ds)
        m = metrics(ds.y, y_hat)
        corr = np.corrcoef(ds.y, y_hat)[0, 1]
        assert m.r2 == pytest.approx(corr ** 2, abs=1e-9)

    def test_sigma_zero_rejected(self):
        with pytest.raises(ValueError):
            metrics(np.full(10, 2.0), np.zeros(10))

    def test_noise_predictors_never_hurt_training_r2(self):
        # Against the intercept-only baseline (R^2 = 0), pure-noise predictors
        # can only move training R^2 up.
        rng = np.random.default_rng(11)
        n = 400
        ds = RegressionDataset(
            x1=rng.normal(size=n), x2=rng.normal(size=n), x3=rng.normal(size=n),
            y=rng.normal(size=n), t=np.arange(n) * 0.5,
            pair_ids=np.array(["P0"] * n, dtype=object),
            categories=np.array(["CAR-CAR"] * n, dtype=object), tau=0.5,
        )
        fit = fit_ols(ds)
        assert metrics(ds.y, fit.predict(ds)).r2 >= -1e-12


class TestWeights:
    def test_zero_residual_weight(self):
        assert wlr_weights(np.array([0.0]))[0] == pytest.approx(1e6)

    def test_half_residual_weight(self):
        assert wlr_weights(np.array([0.5]))[0] == pytest.approx(1.999996, abs=1e-6)

    def test_histogram_bins(self):
        weights = np.array([0.5, 1.0, 4.9, 5.0, 7.2, 1e6])
        rows = weight_histogram(weights, bin_width=5.0, n_bins=2)
        as_dict = dict(rows)
        assert as_dict["0-5"] == 3
        assert as_dict["5-10"] == 2
        assert as_dict[">=10"] == 1


class TestKFold:
    def test_partition_property(self):
        ds = synthetic_dataset(n=600, n_pairs=10)
        report = kfold_eval(ds, k=5, seed=3)
        tested = [pid for fold in report.folds for pid in fold.test_pairs]
        assert sorted(tested) == sorted(set(ds.pair_ids))

    def test_deterministic_for_seed(self):
        ds = synthetic_dataset(n=500, n_pairs=10)
        a = kfold_eval(ds, k=5, seed=42)
        b = kfold_eval(ds, k=5, seed=42)
        assert [f.test_pairs for f in a.folds] == [f.test_pairs for f in b.folds]
        assert a.mean_test.r2 == b.mean_test.r2

    def test_noiseless_model_perfect_in_every_fold(self):
        ds = synthetic_dataset(n=800, noise=0.0, n_pairs=8)
        report = kfold_eval(ds, k=4, seed=0)
        for fold in report.folds:
            assert fold.test.r2 == pytest.approx(1.0, abs=1e-9)

    def test_too_few_pairs_rejected(self):
        ds = synthetic_dataset(n=100, n_pairs=3)
        with pytest.raises(ValueError):
            kfold_eval(ds, k=5)

    def test_best_worst_selection(self):
        ds = synthetic_dataset(n=900, n_pairs=9, noise=0.3)
        report = kfold_eval(ds, k=3, seed=1)
        r2s = [f.test.r2 for f in report.folds]
        assert report.best_by_r2.test.r2 == max(r2s)
        assert report.worst_by_r2.test.r2 == min(r2s)
        nrmses = [f.test.nrmse for f in report.folds]
        assert report.best_by_nrmse.test.nrmse == min(nrmses)
        assert report.worst_by_nrmse.test.nrmse == max(nrmses)


def _metrics(r2=0.0, adj=0.0, mae=0.0, rmse=0.0, nrmse=0.0):
    return Metrics(r2=r2, adj_r2=adj, mae=mae, rmse=rmse, nrmse=nrmse, n=100)


class TestImprovement:
    def test_r2_gain(self):
        rows = improvement_report(_metrics(r2=0.258), _metrics(r2=0.341), removed_fraction=0.5193)
        assert rows["r2"].delta_pct == pytest.approx(32.17, abs=0.05)
        assert rows["outliers_removed_pct"] == pytest.approx(51.93)

    def test_rmse_reduction(self):
        rows = improvement_report(_metrics(rmse=0.774), _metrics(rmse=0.595), removed_fraction=0.0)
        assert rows["rmse"].delta_pct == pytest.approx(-23.1, abs=0.05)

    def test_identical_before_after(self):
        m = _metrics(r2=0.3, adj=0.29, mae=0.5, rmse=0.7, nrmse=0.8)
        rows = improvement_report(m, m, removed_fraction=0.25)
        for name in Metrics.METRIC_FIELDS:
            assert rows[name].delta_pct == 0.0

    def test_zero_before_flagged_undefined(self):
        rows = improvement_report(_metrics(r2=0.0, rmse=0.7), _metrics(r2=0.2, rmse=0.6), 0.1)
        assert rows["r2"].delta_pct is None
        assert rows["rmse"].delta_pct is not None
