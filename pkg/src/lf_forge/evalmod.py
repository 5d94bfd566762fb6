"""Acceleration-response regression harness.

The response model predicts the follower's longitudinal acceleration one
update interval ahead from three stimuli measured now: relative velocity,
bumper-to-bumper gap, and follower speed. Fits are ordinary least squares;
quality is reported as R^2, adjusted R^2, MAE, RMSE, and RMSE normalized by
the population standard deviation of the observed response (so the mean
predictor scores exactly 1). K-fold evaluation splits by pair to avoid
temporal leakage between train and test.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as sstats

from .pairing import CandidatePair
from .trajmodel import GRID_EPS

PREDICTORS = ("rel_vel", "gap_long", "sv_speed")
COLUMN_NAMES = ("intercept",) + PREDICTORS


@dataclass(frozen=True)
class RegressionDataset:
    """Stacked design rows: response is follower acceleration at t + tau."""

    x1: np.ndarray          # relative velocity, m/s
    x2: np.ndarray          # longitudinal gap, m
    x3: np.ndarray          # follower speed, m/s
    y: np.ndarray           # follower acceleration at t + tau, m/s^2
    t: np.ndarray           # stimulus time of each row, s
    pair_ids: np.ndarray    # per-row pair id (object dtype)
    categories: np.ndarray  # per-row category tag
    tau: float

    def __len__(self) -> int:
        return len(self.y)

    @property
    def design(self) -> np.ndarray:
        return np.column_stack([np.ones(len(self)), self.x1, self.x2, self.x3])

    def rows_for(self, pair_ids: set[str]) -> "RegressionDataset":
        mask = np.isin(self.pair_ids, list(pair_ids))
        return self.rows_where(mask)

    def rows_where(self, mask: np.ndarray) -> "RegressionDataset":
        return RegressionDataset(
            x1=self.x1[mask], x2=self.x2[mask], x3=self.x3[mask], y=self.y[mask],
            t=self.t[mask], pair_ids=self.pair_ids[mask],
            categories=self.categories[mask], tau=self.tau,
        )

    def unique_pairs(self) -> list[str]:
        seen: dict[str, None] = {}
        for pid in self.pair_ids:
            seen.setdefault(str(pid))
        return list(seen)


def build_dataset(pairs: Sequence[CandidatePair], tau: float = 0.5) -> RegressionDataset:
    """One row per sample having a successor tau seconds later in its own pair."""
    if not pairs:
        return _empty_dataset(tau)
    dt = pairs[0].sv.dt
    step = round(tau / dt)
    if step < 1 or abs(step * dt - tau) > GRID_EPS:
        raise ValueError(f"tau={tau} is not a positive multiple of dt={dt}")
    x1, x2, x3, y, t, pids, cats = [], [], [], [], [], [], []
    for pair in pairs:
        s = pair.samples
        n = len(s) - step
        if n <= 0:
            continue
        x1.append(s.rel_vel[:n])
        x2.append(s.gap_long[:n])
        x3.append(s.sv_speed[:n])
        y.append(s.sv_accel[step:step + n])
        t.append(s.t[:n])
        pids.extend([pair.pair_id] * n)
        cats.extend([pair.category_tag] * n)
    if not x1:
        return _empty_dataset(tau)
    return RegressionDataset(
        x1=np.concatenate(x1), x2=np.concatenate(x2), x3=np.concatenate(x3),
        y=np.concatenate(y), t=np.concatenate(t),
        pair_ids=np.array(pids, dtype=object), categories=np.array(cats, dtype=object),
        tau=tau,
    )


def _empty_dataset(tau: float) -> RegressionDataset:
    return RegressionDataset(
        x1=np.empty(0), x2=np.empty(0), x3=np.empty(0), y=np.empty(0), t=np.empty(0),
        pair_ids=np.empty(0, dtype=object), categories=np.empty(0, dtype=object),
        tau=tau,
    )


@dataclass(frozen=True)
class ModelFit:
    beta: tuple[float, float, float, float]  # intercept, rel_vel, gap, speed
    std_errors: tuple[float, float, float, float]
    p_values: tuple[float, float, float, float]
    residuals: np.ndarray
    n: int

    def predict(self, dataset: RegressionDataset) -> np.ndarray:
        return dataset.design @ np.asarray(self.beta)


def _collinear_column(design: np.ndarray) -> str:
    rank = 0
    for j in range(design.shape[1]):
        new_rank = np.linalg.matrix_rank(design[:, : j + 1])
        if new_rank == rank:
            return COLUMN_NAMES[j]
        rank = new_rank
    return COLUMN_NAMES[-1]


def fit_ols(dataset: RegressionDataset) -> ModelFit:
    """Least-squares fit of the four-parameter response model.

    P-values are two-sided t-tests on coefficient/standard-error ratios with
    n - 4 degrees of freedom. Rank deficiency raises, naming the collinear
    column.
    """
    n = len(dataset)
    if n <= 4:
        raise ValueError(f"need more than 4 rows to fit, got {n}")
    design = dataset.design
    beta, _, rank, _ = np.linalg.lstsq(design, dataset.y, rcond=None)
    if rank < design.shape[1]:
        raise ValueError(f"design matrix is rank deficient: column '{_collinear_column(design)}' is collinear")
    residuals = dataset.y - design @ beta
    dof = n - design.shape[1]
    sigma2 = float(residuals @ residuals) / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        tvals = np.where(se > 0, beta / se, np.inf)
    pvals = 2.0 * sstats.t.sf(np.abs(tvals), dof)
    return ModelFit(
        beta=tuple(float(b) for b in beta),
        std_errors=tuple(float(v) for v in se),
        p_values=tuple(float(v) for v in pvals),
        residuals=residuals,
        n=n,
    )


@dataclass(frozen=True)
class Metrics:
    r2: float
    adj_r2: float
    mae: float
    rmse: float
    nrmse: float
    n: int

    def as_dict(self) -> dict[str, float]:
        return {"r2": self.r2, "adj_r2": self.adj_r2, "mae": self.mae,
                "rmse": self.rmse, "nrmse": self.nrmse}

    METRIC_FIELDS = ("r2", "adj_r2", "mae", "rmse", "nrmse")


def metrics(y: np.ndarray, y_hat: np.ndarray, p: int = 3) -> Metrics:
    """Fit-quality metrics; sigma_Y is the population (divide-by-n) standard
    deviation so the mean predictor's normalized RMSE is exactly 1."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape or y.size < 2:
        raise ValueError("y and y_hat must match and contain at least 2 values")
    n = y.size
    err = y - y_hat
    sse = float(err @ err)
    sst = float(np.sum((y - y.mean()) ** 2))
    sigma = float(np.std(y))  # population convention
    if sigma <= 1e-12 * max(1.0, abs(float(y.mean()))):
        raise ValueError("sigma_Y is zero; NRMSE undefined")
    r2 = 1.0 - sse / sst
    rmse = float(np.sqrt(sse / n))
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1) if n > p + 1 else float("nan")
    return Metrics(
        r2=r2,
        adj_r2=adj,
        mae=float(np.mean(np.abs(err))),
        rmse=rmse,
        nrmse=rmse / sigma,
        n=n,
    )


WLR_EPSILON = 1e-6


def wlr_weights(residuals: np.ndarray) -> np.ndarray:
    """Diagnostic weights: inverse absolute residuals, floored by epsilon."""
    return 1.0 / (np.abs(np.asarray(residuals, dtype=float)) + WLR_EPSILON)


def weight_histogram(weights: np.ndarray, bin_width: float = 5.0, n_bins: int = 20) -> list[tuple[str, int]]:
    """Counts of weights in [0,5), [5,10), ... with a final open-ended bin."""
    weights = np.asarray(weights, dtype=float)
    edges = np.arange(0.0, bin_width * n_bins + bin_width / 2, bin_width)
    counts, _ = np.histogram(weights, bins=edges)
    rows = [(f"{edges[i]:g}-{edges[i + 1]:g}", int(c)) for i, c in enumerate(counts)]
    rows.append((f">={edges[-1]:g}", int(np.sum(weights >= edges[-1]))))
    return rows


@dataclass(frozen=True)
class FoldResult:
    fold: int
    test_pairs: tuple[str, ...]
    fit: ModelFit
    train: Metrics
    test: Metrics


@dataclass
class EvalReport:
    folds: list[FoldResult] = field(default_factory=list)
    mean_train: Metrics | None = None
    mean_test: Metrics | None = None

    def _select(self, best: bool, key: str) -> FoldResult:
        sign = -1.0 if best == (key in ("mae", "rmse", "nrmse")) else 1.0
        return max(self.folds, key=lambda f: sign * getattr(f.test, key))

    @property
    def best_by_r2(self) -> FoldResult:
        return self._select(True, "r2")

    @property
    def worst_by_r2(self) -> FoldResult:
        return self._select(False, "r2")

    @property
    def best_by_nrmse(self) -> FoldResult:
        return self._select(True, "nrmse")

    @property
    def worst_by_nrmse(self) -> FoldResult:
        return self._select(False, "nrmse")


def _mean_metrics(items: list[Metrics]) -> Metrics:
    return Metrics(
        r2=float(np.mean([m.r2 for m in items])),
        adj_r2=float(np.mean([m.adj_r2 for m in items])),
        mae=float(np.mean([m.mae for m in items])),
        rmse=float(np.mean([m.rmse for m in items])),
        nrmse=float(np.mean([m.nrmse for m in items])),
        n=int(sum(m.n for m in items)),
    )


def kfold_eval(dataset: RegressionDataset, k: int = 5, seed: int = 0) -> EvalReport:
    """Pair-level K-fold cross validation with a seeded shuffle.

    Pairs are partitioned into k folds; each fold is held out once while the
    model is fitted on the rest. Per-fold train/test metrics, their means,
    and the best/worst folds are reported. Deterministic for a fixed seed.
    """
    pair_ids = dataset.unique_pairs()
    if len(pair_ids) < k:
        raise ValueError(f"need at least {k} pairs for {k}-fold evaluation, got {len(pair_ids)}")
    rng = np.random.default_rng(seed)
    order = list(rng.permutation(len(pair_ids)))
    folds = np.array_split([pair_ids[i] for i in order], k)

    report = EvalReport()
    for fold_no, test_ids in enumerate(folds):
        test_set = set(str(p) for p in test_ids)
        train_set = set(pair_ids) - test_set
        train = dataset.rows_for(train_set)
        test = dataset.rows_for(test_set)
        fit = fit_ols(train)
        report.folds.append(FoldResult(
            fold=fold_no,
            test_pairs=tuple(sorted(test_set)),
            fit=fit,
            train=metrics(train.y, fit.predict(train)),
            test=metrics(test.y, fit.predict(test)),
        ))
    report.mean_train = _mean_metrics([f.train for f in report.folds])
    report.mean_test = _mean_metrics([f.test for f in report.folds])
    return report


@dataclass(frozen=True)
class ImprovementRow:
    metric: str
    before: float
    after: float
    delta_pct: float | None  # None when the before value is zero


def improvement_report(
    before: Metrics,
    after: Metrics,
    removed_fraction: float,
) -> dict[str, ImprovementRow | float]:
    """Percentage change per metric, 100*(after-before)/before, with the
    removed-points share reported alongside."""
    rows: dict[str, ImprovementRow | float] = {}
    for name in Metrics.METRIC_FIELDS:
        b = getattr(before, name)
        a = getattr(after, name)
        delta = None if b == 0 else 100.0 * (a - b) / b
        rows[name] = ImprovementRow(metric=name, before=b, after=a, delta_pct=delta)
    rows["outliers_removed_pct"] = 100.0 * removed_fraction
    return rows
