import json

import numpy as np
import pandas as pd
import pytest

from brainz_bp.dataset_io import FeatureTable
from brainz_bp.errors import EmptyTable, LengthMismatch, NonMonotoneCp, TooFewRows
from brainz_bp.evaluation import (FAIL, ZERO_VARIANCE, CvConfig, SplitUnit, aami_check, bhs_grade, bland_altman,
                                  compare_models, cross_validate, cumulative_percentages, export_plots, group_keys,
                                  kfold_split, metrics, report_from_dict, report_to_dict, sweep_n_trees)
from brainz_bp.models import ForestConfig, ModelKind, ModelSettings
from conftest import make_table

LR = ModelSettings(kind=ModelKind.LR)
SMALL_RF = ModelSettings(kind=ModelKind.RF, forest=ForestConfig(n_trees=10, seed=5))


# ----- fold assignment -----

def test_kfold_balances_fold_sizes():
    folds = kfold_split(1942, config=CvConfig(n_folds=10, shuffle_seed=1))
    sizes = np.bincount(folds)
    assert len(sizes) == 10
    assert set(sizes) == {194, 195}
    assert sizes.sum() == 1942


def test_kfold_is_deterministic():
    config = CvConfig(n_folds=5, shuffle_seed=7)
    assert np.array_equal(kfold_split(100, config=config), kfold_split(100, config=config))
    assert not np.array_equal(kfold_split(100, config=config),
                              kfold_split(100, config=CvConfig(n_folds=5, shuffle_seed=8)))


@pytest.mark.parametrize("unit", [SplitUnit.SUBJECT, SplitUnit.TRIAL])
def test_grouped_folds_keep_groups_together(informative_table, unit):
    config = CvConfig(n_folds=5, split_unit=unit)
    keys = group_keys(informative_table, unit)
    folds = kfold_split(len(keys), keys, config)
    for key in set(keys):
        assert len({folds[i] for i, k in enumerate(keys) if k == key}) == 1
    assert len(set(folds)) == 5


def test_kfold_needs_enough_rows_and_groups():
    with pytest.raises(TooFewRows):
        kfold_split(5, config=CvConfig(n_folds=10))
    with pytest.raises(TooFewRows):
        kfold_split(20, ["S01"] * 10 + ["S02"] * 10, CvConfig(n_folds=3, split_unit=SplitUnit.SUBJECT))
    with pytest.raises(LengthMismatch):
        kfold_split(20, ["S01"] * 5, CvConfig(n_folds=2, split_unit=SplitUnit.SUBJECT))


def test_single_fold_is_rejected():
    with pytest.raises(TooFewRows):
        CvConfig(n_folds=1)


# ----- metrics and standards -----

def test_metrics_example():
    m = metrics([100.0, 120.0], [102.0, 118.0])
    assert (m.me, m.mae, m.rmse) == pytest.approx((0.0, 2.0, 2.0))
    assert m.r == pytest.approx(1.0)
    assert not m.flags


def test_metrics_constant_offset():
    reference = np.array([110.0, 125.0, 131.0, 140.0])
    m = metrics(reference, reference + 5.0)
    assert (m.me, m.mae, m.rmse, m.r) == pytest.approx((5.0, 5.0, 5.0, 1.0))


def test_metrics_constant_estimate_has_undefined_r():
    m = metrics([110.0, 120.0, 130.0], [120.0, 120.0, 120.0])
    assert np.isnan(m.r)
    assert m.flags == (ZERO_VARIANCE,)


def test_metrics_length_mismatch():
    with pytest.raises(LengthMismatch):
        metrics([1.0, 2.0], [1.0])


@pytest.mark.parametrize("me, rmse, expected", [
    (0.08, 4.11, True),
    (0.01, 3.36, True),
    (-5.0, 8.0, True),
    (5.01, 4.0, False),
    (0.0, 8.01, False),
])
def test_aami_check(me, rmse, expected):
    assert aami_check(me, rmse) is expected


@pytest.mark.parametrize("cp, grade", [
    ((83.1, 95.0, 98.6), "A"),
    ((86.9, 97.7, 99.1), "A"),
    ((59.9, 95.0, 99.0), "B"),
    ((45.0, 70.0, 88.0), "C"),
    ((40.0, 64.0, 90.0), FAIL),
])
def test_bhs_grade(cp, grade):
    assert bhs_grade(*cp) == grade


def test_bhs_grade_rejects_non_monotone():
    with pytest.raises(NonMonotoneCp):
        bhs_grade(90.0, 80.0, 95.0)
    with pytest.raises(NonMonotoneCp):
        bhs_grade(50.0, 80.0, 101.0)


def test_cumulative_percentages_are_inclusive():
    assert cumulative_percentages([0.0, 5.0, 5.01, -10.0, 20.0]) == pytest.approx((40.0, 80.0, 80.0))


def test_bland_altman_limits():
    identical = bland_altman([120.0, 130.0, 140.0], [120.0, 130.0, 140.0])
    assert (identical.bias, identical.sd, identical.lower, identical.upper) == (0.0, 0.0, 0.0, 0.0)
    limits = bland_altman([100.0, 100.0], [101.0, 103.0])
    assert limits.bias == pytest.approx(2.0)
    assert limits.sd == pytest.approx(np.sqrt(2.0))
    assert limits.upper - limits.lower == pytest.approx(2 * 1.96 * np.sqrt(2.0))


# ----- cross-validation -----

@pytest.fixture
def lr_report(informative_table):
    return cross_validate(informative_table, LR, CvConfig(n_folds=10, shuffle_seed=3))


def test_cross_validation_of_linear_data(lr_report):
    assert lr_report.n_rows == 390
    assert lr_report.metrics.mae < 1.0
    assert lr_report.metrics.r > 0.99
    assert lr_report.aami_pass
    assert lr_report.bhs_grade == "A"
    assert len(lr_report.fold_metrics) == 10
    assert sorted(set(lr_report.folds)) == list(range(10))
    assert lr_report.provenance["n_folds"] == 10


def test_fold_summary(lr_report):
    mean, sd = lr_report.fold_summary("mae")
    maes = [m.mae for m in lr_report.fold_metrics]
    assert mean == pytest.approx(np.mean(maes))
    assert sd == pytest.approx(np.std(maes, ddof=1))


def test_cross_validation_is_deterministic(informative_table):
    cv = CvConfig(n_folds=3, shuffle_seed=2)
    first = cross_validate(informative_table, SMALL_RF, cv)
    second = cross_validate(informative_table, SMALL_RF, cv, threads=2)
    assert np.array_equal(first.estimate, second.estimate)
    assert first.metrics == second.metrics


def test_segment_split_leaks_duplicated_rows():
    rng = np.random.default_rng(17)
    X = rng.standard_normal((60, 4))
    sbp = rng.normal(120.0, 12.0, 60)
    groups = [f"S{i % 12 + 1:02d}/T01" for i in range(60)]
    tripled = make_table(np.tile(X, (3, 1)), np.tile(sbp, 3), groups * 3)
    dt = ModelSettings(kind=ModelKind.DT)
    leaky = cross_validate(tripled, dt, CvConfig(n_folds=10, shuffle_seed=1))
    assert np.median(np.abs(leaky.estimate - leaky.reference)) == 0.0
    grouped = cross_validate(tripled, dt, CvConfig(n_folds=4, shuffle_seed=1, split_unit=SplitUnit.SUBJECT))
    assert np.median(np.abs(grouped.estimate - grouped.reference)) > 0.0


def test_dbp_target(informative_table):
    report = cross_validate(informative_table, LR, CvConfig(n_folds=3, target="DBP"))
    assert report.target == "dbp"
    assert np.array_equal(report.reference, informative_table.sbp - 40.0)


def test_invalid_rows_are_not_evaluated(informative_table):
    n = len(informative_table.sbp)
    valid = np.ones(n, dtype=bool)
    valid[:30] = False
    table = FeatureTable(informative_table.features, informative_table.sbp, informative_table.dbp,
                         informative_table.group_ids, valid, ["NoPeaksFound"] * 30 + [""] * (n - 30),
                         np.arange(n), informative_table.feature_names)
    assert cross_validate(table, LR, CvConfig(n_folds=3)).n_rows == n - 30


def test_no_valid_rows():
    table = FeatureTable(np.zeros((4, 2)), [120.0] * 4, [80.0] * 4, ["S01/T01"] * 4, [False] * 4,
                         ["NoPeaksFound"] * 4, np.arange(4), ("a", "b"))
    with pytest.raises(EmptyTable):
        cross_validate(table, LR, CvConfig(n_folds=2))


def test_compare_models_share_folds(informative_table):
    cv = CvConfig(n_folds=3, shuffle_seed=6)
    reports = compare_models(informative_table, ["lr", "dt"], LR, cv)
    assert list(reports) == ["lr", "dt"]
    assert np.array_equal(reports["lr"].folds, reports["dt"].folds)
    assert reports["lr"].model_kind == "lr"
    assert reports["lr"].metrics.mae < reports["dt"].metrics.mae


def test_sweep_n_trees(informative_table):
    curve = sweep_n_trees(informative_table, [1, 8], SMALL_RF, CvConfig(n_folds=3))
    assert list(curve.columns) == ["n_trees", "target", "me", "mae", "rmse", "r"]
    assert list(curve["n_trees"]) == [1, 8]
    assert curve.loc[1, "mae"] < curve.loc[0, "mae"]


# ----- export and persistence -----

def test_export_plots(tmp_path, lr_report):
    paths = export_plots(lr_report, tmp_path / "plots", 2.0)
    assert paths["scatter"].name == "sbp_lr_scatter.csv"
    assert set(paths) == {"histogram", "scatter", "scatter_fit", "bland_altman", "bland_altman_limits"}

    histogram = pd.read_csv(paths["histogram"])
    assert histogram["count"].sum() == lr_report.n_rows
    assert np.allclose(histogram["bin_right"] - histogram["bin_left"], 2.0)

    scatter = pd.read_csv(paths["scatter"])
    assert np.array_equal(scatter["reference"].to_numpy(), lr_report.reference)

    limits = pd.read_csv(paths["bland_altman_limits"]).iloc[0]
    expected = bland_altman(lr_report.reference, lr_report.estimate)
    assert limits["bias"] == pytest.approx(expected.bias, abs=1e-12)
    assert limits["sd"] == pytest.approx(expected.sd, abs=1e-12)
    agreement = pd.read_csv(paths["bland_altman"])
    assert agreement["difference"].std(ddof=1) == pytest.approx(expected.sd, abs=1e-9)


def test_report_dict_round_trip(lr_report):
    restored = report_from_dict(json.loads(json.dumps(report_to_dict(lr_report))))
    assert restored.metrics == lr_report.metrics
    assert restored.fold_metrics == lr_report.fold_metrics
    assert restored.bhs_grade == lr_report.bhs_grade
    assert np.array_equal(restored.estimate, lr_report.estimate)
    assert np.array_equal(restored.folds, lr_report.folds)
