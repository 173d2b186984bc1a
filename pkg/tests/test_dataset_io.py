import numpy as np
import pandas as pd
import pytest

from brainz_bp.dataset_io import (FEATURE_NAMES, FeatureTable, FeatureVector, RawFormat, RawRecording,
                                  adapt_public_trial, dataset_summary, load_feature_table, load_labels, load_raw,
                                  load_series, save_feature_table, save_labels, save_raw, save_series)
from brainz_bp.errors import InvalidRecording, IoFailure, LengthMismatch, MissingHeaderField, NonFiniteSample
from conftest import make_series, make_table

HEADER = "# sample_rate_hz=100000 excitation_freq_hz=10000 r0_ohm=10000 subject_id=S01 trial_id=T02\n"


def _recording(n=400, seed=0):
    rng = np.random.default_rng(seed)
    return RawRecording(rng.standard_normal(n), rng.standard_normal(n), rng.standard_normal(n),
                        100_000.0, 10_000.0, 10_000.0, "S01", "T02")


@pytest.mark.parametrize("fmt", [RawFormat.CSV, RawFormat.BIN])
def test_raw_round_trip(tmp_path, fmt):
    rec = _recording()
    loaded = load_raw(save_raw(rec, tmp_path / f"trial.{fmt.value}", fmt), fmt)
    for name in ("vs_samples", "vr_samples", "ecg_samples"):
        assert np.array_equal(getattr(loaded, name), getattr(rec, name))
    assert (loaded.subject_id, loaded.trial_id) == ("S01", "T02")
    assert loaded.duration_s == pytest.approx(400 / 100_000)


def test_duration_follows_header_rate(tmp_path):
    path = tmp_path / "t.csv"
    rows = "\n".join("0.1,0.2,0.3" for _ in range(1000))
    path.write_text(HEADER + "vs,vr,ecg\n" + rows + "\n")
    assert load_raw(path).duration_s == pytest.approx(0.01)


def test_short_column_is_length_mismatch(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(HEADER + "vs,vr,ecg\n1,2,3\n4,5,6\n7,,9\n")
    with pytest.raises(LengthMismatch):
        load_raw(path)


def test_nan_reports_row(tmp_path):
    path = tmp_path / "t.csv"
    rows = ["1,2,3"] * 10
    rows[7] = "1,NaN,3"
    path.write_text(HEADER + "vs,vr,ecg\n" + "\n".join(rows) + "\n")
    with pytest.raises(NonFiniteSample) as info:
        load_raw(path)
    assert info.value.row == 7
    assert info.value.column == "vr"
    assert info.value.stage == "dataset-io"


def test_missing_header_field(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("# sample_rate_hz=100000 r0_ohm=10000\nvs,vr,ecg\n1,2,3\n")
    with pytest.raises(MissingHeaderField) as info:
        load_raw(path)
    assert info.value.details["field"] == "excitation_freq_hz"


def test_missing_file_is_io_failure(tmp_path):
    with pytest.raises(IoFailure):
        load_raw(tmp_path / "absent.csv")


def test_unresolvable_excitation_is_rejected():
    with pytest.raises(InvalidRecording):
        RawRecording(np.ones(10), np.ones(10), np.ones(10), 100_000.0, 30_000.0, 10_000.0)


def test_series_bundle_round_trip(tmp_path):
    a = make_series(np.linspace(0, 1, 50), t0=0.001)
    b = a.with_step(np.cos(np.arange(50.0)), "fir:taps=3")
    loaded = load_series(save_series(tmp_path / "s.csv", {"biz": a, "ecg": b}))
    assert np.array_equal(loaded["ecg"].values, b.values)
    assert loaded["ecg"].processing_log == ("fir:taps=3",)
    assert loaded["biz"].t0_s == 0.001


def test_labels_round_trip(tmp_path):
    labels = {("S01", "T01"): (121.5, 80.25), ("S02", "T03"): (140.0, 90.0)}
    assert load_labels(save_labels(tmp_path / "labels.csv", labels)) == labels


def test_feature_table_round_trip_keeps_invalid_rows(tmp_path):
    rng = np.random.default_rng(2)
    good = FeatureVector(rng.standard_normal(42), 120.0, 80.0, True, (), "S01/T01", 0, n_excluded_cycles=2)
    bad = FeatureVector(np.full(42, np.nan), 121.0, 81.0, False, ("NoPeaksFound",), "S01/T01", 1)
    table = FeatureTable.from_vectors([good, bad])
    table.provenance["seed"] = 4
    path = save_feature_table(table, tmp_path / "features.csv")
    header = path.read_text().splitlines()[1].split(",")
    assert header[6] == "n_excluded_cycles"
    assert header[7:] == list(FEATURE_NAMES)
    loaded = load_feature_table(path)
    assert loaded.equals(table)
    assert loaded.rows[1].reasons == ("NoPeaksFound",)
    assert list(loaded.n_excluded_cycles) == [2, 0]
    assert loaded.rows[0].n_excluded_cycles == 2
    assert list(loaded.take(np.array([0])).n_excluded_cycles) == [2]


def test_empty_feature_table_round_trip(tmp_path):
    loaded = load_feature_table(save_feature_table(FeatureTable.empty(), tmp_path / "empty.csv"))
    assert len(loaded) == 0
    assert loaded.feature_names == FEATURE_NAMES


def test_valid_row_with_nan_is_rejected():
    with pytest.raises(InvalidRecording):
        make_table([[np.nan, 1.0]], [120.0])


def test_summary_single_row():
    stats = dataset_summary(make_table([[0.0]], [120.0]))
    assert (stats.sbp_mean, stats.dbp_mean, stats.sbp_sd) == (120.0, 80.0, 0.0)


def test_summary_two_rows():
    stats = dataset_summary(make_table([[0.0], [1.0]], [100.0, 140.0], ["S01/T01", "S02/T01"]))
    assert stats.sbp_mean == 120.0
    assert stats.dbp_mean == 80.0
    assert stats.sbp_sd == pytest.approx(28.2842712474619)
    assert stats.dbp_sd == pytest.approx(28.2842712474619)
    assert stats.per_subject_counts == {"S01": 1, "S02": 1}


# ----- public dataset adapter -----

PUBLIC_META = {"sample_rate_hz": 100_000.0, "excitation_freq_hz": 10_000.0, "r0_ohm": 10_000.0,
               "subject_id": "P07", "trial_id": "R3"}


def test_public_trial_uses_configured_columns():
    frame = pd.DataFrame({"VS": [1.0, 2.0, 3.0, 4.0], "VR": [0.5] * 4, "ECG": [0.0, 0.1, 0.0, -0.1]})
    rec = adapt_public_trial(frame, PUBLIC_META)
    assert np.array_equal(rec.vs_samples, [1.0, 2.0, 3.0, 4.0])
    assert (rec.subject_id, rec.trial_id) == ("P07", "R3")
    other = adapt_public_trial(frame.rename(columns={"VS": "sense"}), PUBLIC_META,
                               {"vs": "sense", "vr": "VR", "ecg": "ECG"})
    assert np.array_equal(other.vs_samples, rec.vs_samples)


def test_public_trial_rejects_bad_input():
    frame = pd.DataFrame({"VS": [1.0, 2.0], "VR": [0.5, np.nan], "ECG": [0.0, 0.1]})
    with pytest.raises(NonFiniteSample) as info:
        adapt_public_trial(frame, PUBLIC_META)
    assert (info.value.row, info.value.column) == (1, "VR")
    with pytest.raises(MissingHeaderField):
        adapt_public_trial(frame.drop(columns=["ECG"]), PUBLIC_META)
    with pytest.raises(MissingHeaderField):
        adapt_public_trial(frame.fillna(0.5), {"sample_rate_hz": 100_000.0})
