"""
Cross-validation harness, error metrics and the AAMI / BHS graders.

Held-out predictions of every fold are pooled in row order, so the grading
and the plot exports see exactly one estimate per row of the table.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .config import BHS_GRADES, EVAL_CONFIG
from .dataset_io import FeatureTable
from .errors import EmptyTable, IoFailure, LengthMismatch, NonMonotoneCp, TooFewRows
from .models import ModelKind, ModelSettings, predict, train_model

logger = logging.getLogger(__name__)

ZERO_VARIANCE = "ZeroVariance"
FAIL = "FAIL"


class SplitUnit(Enum):
    SEGMENT = "segment"
    TRIAL = "trial"
    SUBJECT = "subject"


@dataclass(frozen=True)
class CvConfig:
    n_folds: int = 10
    shuffle_seed: int = 0
    split_unit: SplitUnit = SplitUnit.SEGMENT
    target: str = "sbp"

    def __post_init__(self):
        if self.n_folds < 2:
            raise TooFewRows(f"n_folds must be >= 2, got {self.n_folds}", stage="eval")
        object.__setattr__(self, "split_unit", SplitUnit(self.split_unit))
        object.__setattr__(self, "target", self.target.lower())

    @classmethod
    def from_sections(cls, sections: Mapping[str, Mapping[str, Any]], target: str = "sbp") -> "CvConfig":
        return cls(int(sections["eval"]["n_folds"]), int(sections["runtime"]["seed"]),
                   SplitUnit(sections["eval"]["split_unit"]), target)


@dataclass(frozen=True)
class Metrics:
    me: float
    mae: float
    rmse: float
    r: float
    flags: Tuple[str, ...] = ()


@dataclass(frozen=True)
class BlandAltman:
    bias: float
    sd: float
    lower: float
    upper: float


@dataclass(eq=False)
class EvalReport:
    """Pooled and per-fold results of one cross-validated model on one target."""

    target: str
    model_kind: str
    metrics: Metrics
    fold_metrics: List[Metrics]
    cp5: float
    cp10: float
    cp15: float
    aami_pass: bool
    bhs_grade: str
    reference: np.ndarray
    estimate: np.ndarray
    folds: np.ndarray
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return len(self.reference)

    def fold_summary(self, name: str) -> Tuple[float, float]:
        """(mean, SD) of one metric across folds, ignoring undefined folds."""
        values = np.array([getattr(m, name) for m in self.fold_metrics], dtype=float)
        values = values[np.isfinite(values)]
        if len(values) == 0:
            return float("nan"), float("nan")
        return float(values.mean()), float(values.std(ddof=1)) if len(values) > 1 else 0.0


def group_keys(table: FeatureTable, unit: SplitUnit) -> Optional[List[str]]:
    if unit is SplitUnit.SEGMENT:
        return None
    return table.subjects if unit is SplitUnit.SUBJECT else list(table.group_ids)


def kfold_split(n_rows: int, groups: Optional[Sequence[str]] = None, config: CvConfig = CvConfig()) -> np.ndarray:
    """Fold index of every row; grouped rows always share a fold."""
    if n_rows < config.n_folds:
        raise TooFewRows(f"{n_rows} rows cannot fill {config.n_folds} folds", stage="eval",
                         n_rows=n_rows, n_folds=config.n_folds)
    rng = np.random.default_rng(config.shuffle_seed)
    folds = np.empty(n_rows, dtype=int)
    if groups is None or config.split_unit is SplitUnit.SEGMENT:
        for k, chunk in enumerate(np.array_split(rng.permutation(n_rows), config.n_folds)):
            folds[chunk] = k
        return folds

    if len(groups) != n_rows:
        raise LengthMismatch(f"{len(groups)} group keys for {n_rows} rows", stage="eval")
    unique, inverse = np.unique(np.asarray(groups, dtype=str), return_inverse=True)
    if len(unique) < config.n_folds:
        raise TooFewRows(f"{len(unique)} groups cannot fill {config.n_folds} folds", stage="eval",
                         n_groups=len(unique), n_folds=config.n_folds)
    sizes = np.bincount(inverse, minlength=len(unique))
    fold_sizes = np.zeros(config.n_folds, dtype=int)
    group_fold = np.empty(len(unique), dtype=int)
    for g in rng.permutation(len(unique)):
        k = int(np.argmin(fold_sizes))
        group_fold[g] = k
        fold_sizes[k] += sizes[g]
    return group_fold[inverse]


def metrics(reference: np.ndarray, estimate: np.ndarray) -> Metrics:
    reference = np.asarray(reference, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if len(reference) != len(estimate) or len(reference) == 0:
        raise LengthMismatch(f"{len(reference)} references vs {len(estimate)} estimates", stage="eval")
    error = estimate - reference
    me = float(error.mean())
    mae = float(np.abs(error).mean())
    rmse = float(np.sqrt(np.mean(error ** 2)))
    if np.ptp(reference) == 0 or np.ptp(estimate) == 0:
        return Metrics(me, mae, rmse, float("nan"), (ZERO_VARIANCE,))
    r = float(np.corrcoef(estimate, reference)[0, 1])
    return Metrics(me, mae, rmse, r)


def aami_check(me: float, rmse: float, me_limit: float = 5.0, sd_limit: float = 8.0) -> bool:
    return abs(me) <= me_limit and rmse <= sd_limit


def bhs_grade(cp5: float, cp10: float, cp15: float,
              grades: Mapping[str, Sequence[float]] = BHS_GRADES) -> str:
    """Best BHS grade whose three cumulative-percentage minima are all met."""
    if not 0 <= cp5 <= cp10 <= cp15 <= 100:
        raise NonMonotoneCp(f"Cumulative percentages ({cp5}, {cp10}, {cp15}) are not monotone in [0, 100]",
                            stage="eval")
    for grade in sorted(grades):
        need5, need10, need15 = grades[grade]
        if cp5 >= need5 and cp10 >= need10 and cp15 >= need15:
            return grade
    return FAIL


def cumulative_percentages(errors: np.ndarray, thresholds: Sequence[float] = (5.0, 10.0, 15.0)) -> Tuple[float, ...]:
    """Percent of |error| at or below each threshold."""
    magnitude = np.abs(np.asarray(errors, dtype=float))
    if len(magnitude) == 0:
        return tuple(0.0 for _ in thresholds)
    return tuple(float(100.0 * np.mean(magnitude <= t)) for t in thresholds)


def bland_altman(reference: np.ndarray, estimate: np.ndarray) -> BlandAltman:
    difference = np.asarray(estimate, dtype=float) - np.asarray(reference, dtype=float)
    bias = float(difference.mean())
    sd = float(difference.std(ddof=1)) if len(difference) > 1 else 0.0
    return BlandAltman(bias, sd, bias - 1.96 * sd, bias + 1.96 * sd)


def _run_fold(X: np.ndarray, y: np.ndarray, folds: np.ndarray, k: int, settings: ModelSettings,
              names: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
    test = np.flatnonzero(folds == k)
    train = np.flatnonzero(folds != k)
    model = train_model(X[train], y[train], settings.with_seed(settings.forest.seed + k), names)
    return test, predict(model, X[test])


def cross_validate(table: FeatureTable, settings: ModelSettings = ModelSettings(), cv: CvConfig = CvConfig(),
                   threads: int = 1, eval_config: Mapping[str, Any] = EVAL_CONFIG) -> EvalReport:
    """k-fold cross-validation of one regressor on the valid rows of ``table``."""
    valid = table.valid_rows()
    if len(valid) == 0:
        raise EmptyTable("No valid feature rows to evaluate", stage="eval")
    X = valid.features
    y = valid.target(cv.target)
    folds = kfold_split(len(valid), group_keys(valid, cv.split_unit), cv)
    logger.info("--- Stage: eval (%s, %s, %d folds, %d rows) ---", settings.kind.value, cv.target, cv.n_folds, len(y))

    fold_settings = replace(settings, threads=1) if threads > 1 else settings
    results = Parallel(n_jobs=threads)(
        delayed(_run_fold)(X, y, folds, k, fold_settings, valid.feature_names) for k in range(cv.n_folds)
    )
    estimate = np.empty(len(y))
    fold_metrics = []
    for test, y_hat in results:
        estimate[test] = y_hat
        fold_metrics.append(metrics(y[test], y_hat))
    undefined = sum(ZERO_VARIANCE in m.flags for m in fold_metrics)
    if undefined:
        logger.warning("R undefined on %d of %d folds", undefined, cv.n_folds)

    pooled = metrics(y, estimate)
    cp5, cp10, cp15 = cumulative_percentages(estimate - y, eval_config["cp_thresholds"])
    report = EvalReport(
        target=cv.target,
        model_kind=settings.kind.value,
        metrics=pooled,
        fold_metrics=fold_metrics,
        cp5=cp5,
        cp10=cp10,
        cp15=cp15,
        aami_pass=aami_check(pooled.me, pooled.rmse, eval_config["aami_me_limit"], eval_config["aami_sd_limit"]),
        bhs_grade=bhs_grade(cp5, cp10, cp15),
        reference=y,
        estimate=estimate,
        folds=folds,
        provenance={
            "n_folds": cv.n_folds,
            "shuffle_seed": cv.shuffle_seed,
            "split_unit": cv.split_unit.value,
            "feature_names": list(valid.feature_names),
            **{f"table_{k}": v for k, v in table.provenance.items()},
        },
    )
    logger.info("%s %s: MAE %.2f, RMSE %.2f, R %.3f, BHS %s", settings.kind.value, cv.target,
                pooled.mae, pooled.rmse, pooled.r, report.bhs_grade)
    return report


def compare_models(table: FeatureTable, kinds: Sequence[str], settings: ModelSettings = ModelSettings(),
                   cv: CvConfig = CvConfig(), threads: int = 1,
                   eval_config: Mapping[str, Any] = EVAL_CONFIG) -> Dict[str, EvalReport]:
    """Cross-validate several regressors on the same folds."""
    return {kind: cross_validate(table, settings.with_kind(ModelKind(kind)), cv, threads, eval_config)
            for kind in kinds}


def sweep_n_trees(table: FeatureTable, grid: Sequence[int], settings: ModelSettings = ModelSettings(),
                  cv: CvConfig = CvConfig(), threads: int = 1) -> pd.DataFrame:
    """Random-forest CV error as a function of the number of trees."""
    rows = []
    for n_trees in grid:
        report = cross_validate(table, settings.with_kind(ModelKind.RF).with_trees(int(n_trees)), cv, threads)
        rows.append({"n_trees": int(n_trees), "target": cv.target, "me": report.metrics.me,
                     "mae": report.metrics.mae, "rmse": report.metrics.rmse, "r": report.metrics.r})
    return pd.DataFrame(rows)


def export_plots(report: EvalReport, out_dir: Path, bin_mmhg: float = 2.0) -> Dict[str, Path]:
    """Write the histogram, scatter and Bland-Altman CSVs of ``report``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"Cannot create {out_dir}: {exc}", stage="eval", path=str(out_dir)) from exc
    ref, est = report.reference, report.estimate
    error = est - ref
    prefix = f"{report.target}_{report.model_kind}"

    low = np.floor(error.min() / bin_mmhg) * bin_mmhg if len(error) else 0.0
    high = max(low + bin_mmhg, np.ceil(error.max() / bin_mmhg) * bin_mmhg) if len(error) else bin_mmhg
    edges = np.arange(low, high + bin_mmhg / 2, bin_mmhg)
    counts, edges = np.histogram(error, bins=edges)
    histogram = pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "count": counts})

    if np.ptp(ref) > 0:
        slope, intercept = np.polyfit(ref, est, 1)
    else:
        slope, intercept = 0.0, float(est.mean())
    scatter = pd.DataFrame({"reference": ref, "estimate": est, "fitted": slope * ref + intercept})
    fit = pd.DataFrame([{"slope": slope, "intercept": intercept, "r": report.metrics.r}])

    limits = bland_altman(ref, est)
    agreement = pd.DataFrame({"mean": (ref + est) / 2.0, "difference": error})
    limit_frame = pd.DataFrame([{"bias": limits.bias, "sd": limits.sd, "lower": limits.lower,
                                 "upper": limits.upper}])

    frames = {
        "histogram": histogram,
        "scatter": scatter,
        "scatter_fit": fit,
        "bland_altman": agreement,
        "bland_altman_limits": limit_frame,
    }
    paths = {}
    for name, frame in frames.items():
        path = out_dir / f"{prefix}_{name}.csv"
        frame.to_csv(path, index=False, float_format="%.17g")
        paths[name] = path
    logger.info("Wrote %d plot tables for %s to %s", len(paths), prefix, out_dir)
    return paths


def _metrics_dict(m: Metrics) -> Dict[str, Any]:
    return {"me": m.me, "mae": m.mae, "rmse": m.rmse, "r": None if np.isnan(m.r) else m.r, "flags": list(m.flags)}


def _metrics_from(data: Mapping[str, Any]) -> Metrics:
    r = data["r"]
    return Metrics(data["me"], data["mae"], data["rmse"], float("nan") if r is None else r, tuple(data["flags"]))


def report_to_dict(report: EvalReport) -> Dict[str, Any]:
    return {
        "target": report.target,
        "model_kind": report.model_kind,
        "metrics": _metrics_dict(report.metrics),
        "fold_metrics": [_metrics_dict(m) for m in report.fold_metrics],
        "cp5": report.cp5,
        "cp10": report.cp10,
        "cp15": report.cp15,
        "aami_pass": report.aami_pass,
        "bhs_grade": report.bhs_grade,
        "reference": report.reference.tolist(),
        "estimate": report.estimate.tolist(),
        "folds": report.folds.tolist(),
        "provenance": report.provenance,
    }


def report_from_dict(data: Mapping[str, Any]) -> EvalReport:
    return EvalReport(
        target=data["target"],
        model_kind=data["model_kind"],
        metrics=_metrics_from(data["metrics"]),
        fold_metrics=[_metrics_from(m) for m in data["fold_metrics"]],
        cp5=data["cp5"],
        cp10=data["cp10"],
        cp15=data["cp15"],
        aami_pass=data["aami_pass"],
        bhs_grade=data["bhs_grade"],
        reference=np.asarray(data["reference"], dtype=float),
        estimate=np.asarray(data["estimate"], dtype=float),
        folds=np.asarray(data["folds"], dtype=int),
        provenance=dict(data.get("provenance", {})),
    )
