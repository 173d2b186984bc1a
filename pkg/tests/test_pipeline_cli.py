import json
from dataclasses import replace

import numpy as np
import pytest

from brainz_bp.cli import build_parser, flag_overrides, main, render_reports
from brainz_bp.config import MANIFEST_VERSION, PipelineConfig
from brainz_bp.dataset_io import SeriesKind, load_feature_table, load_series, save_series
from brainz_bp.errors import InvalidLabels
from brainz_bp.evaluation import CvConfig, cross_validate, report_from_dict
from brainz_bp.models import ModelKind, ModelSettings, load_model
from brainz_bp.pipeline import StageSettings, feature_table_from_series, synth_config, trial_key, trial_stem
from brainz_bp.synthgen import generate
from conftest import make_series

# 500 Hz after demodulation with a lighter front end and SG window
TINY_CONFIG = f"""manifest_version={MANIFEST_VERSION}
acquisition.sample_rate_hz=20000
acquisition.excitation_freq_hz=2000
demod.n_block=40
preprocess.sg_window_len=1001
model.n_trees=10
eval.n_folds=5
runtime.threads=1
"""


@pytest.fixture(scope="module")
def tiny_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("config") / "tiny.cfg"
    path.write_text(TINY_CONFIG, encoding="utf-8")
    return path


def _error_payload(capsys):
    lines = [line for line in capsys.readouterr().err.splitlines() if line.startswith("{")]
    return json.loads(lines[-1])


# ----- naming and parsing -----

def test_trial_stem_and_key(tmp_path):
    stem = trial_stem("S03", "T07")
    assert trial_key(tmp_path / f"{stem}.csv") == ("S03", "T07")
    with pytest.raises(InvalidLabels):
        trial_key(tmp_path / "S03-T07.csv")


def test_flag_overrides():
    args = build_parser().parse_args(["pipeline", "--seed", "3", "--kind", "dt", "--snr-db", "0"])
    assert flag_overrides(args) == {"runtime.seed": 3, "model.kind": "dt", "synth.noise_snr_db": 0.0}
    args = build_parser().parse_args(["synth", "--noise-free"])
    assert flag_overrides(args) == {"synth.noise_free": True}


def test_signal_path_flag_overrides():
    args = build_parser().parse_args(["demod", "t.csv", "--n-block", "50", "--excitation-hz", "2500",
                                      "--kinds", "abs,imag"])
    assert flag_overrides(args) == {"demod.n_block": 50, "demod.excitation_freq_hz": 2500.0,
                                    "demod.kinds": "abs,imag"}
    args = build_parser().parse_args(["preprocess", "t.csv", "--fir-order", "400", "--fir-low-hz", "0.7",
                                      "--fir-high-hz", "8", "--fir-design", "windowed_sinc", "--fir-window", "hamming",
                                      "--sg-order", "2", "--sg-window", "801", "--sg-mode-biz", "smooth",
                                      "--sg-mode-ecg", "smooth", "--window-s", "4", "--overlap", "0.5"])
    assert flag_overrides(args) == {
        "preprocess.fir_order": 400, "preprocess.fir_low_hz": 0.7, "preprocess.fir_high_hz": 8.0,
        "preprocess.fir_design": "windowed_sinc", "preprocess.fir_window": "hamming",
        "preprocess.sg_poly_order": 2, "preprocess.sg_window_len": 801,
        "preprocess.sg_mode_biz": "smooth", "preprocess.sg_mode_ecg": "smooth",
        "preprocess.window_s": 4.0, "preprocess.overlap_fraction": 0.5,
    }
    config = PipelineConfig().with_overrides(flag_overrides(build_parser().parse_args(
        ["demod", "t.csv", "--kinds", "abs,imag", "--excitation-hz", "2500"])))
    settings = StageSettings.from_config(config)
    assert settings.kinds == ("abs", "imag")
    assert settings.excitation_freq_hz == 2500.0
    assert StageSettings.from_config(PipelineConfig()).excitation_freq_hz is None


def test_zero_db_is_noisy_and_noise_free_is_explicit():
    noisy = PipelineConfig().with_overrides({"synth.noise_snr_db": 0})
    assert synth_config(noisy).noise_snr_db == 0.0
    assert synth_config(noisy.with_overrides({"synth.noise_free": True})).noise_snr_db is None
    clean_rec, _ = generate(replace(synth_config(noisy), noise_snr_db=None, sample_rate_hz=20_000.0,
                                    excitation_freq_hz=2_000.0, n_block=40), 4.0)
    noisy_rec, _ = generate(replace(synth_config(noisy), sample_rate_hz=20_000.0, excitation_freq_hz=2_000.0,
                                    n_block=40), 4.0)
    assert not np.allclose(noisy_rec.vs_samples, clean_rec.vs_samples)


def test_missing_label_is_reported(tmp_path):
    n = 5000
    path = save_series(tmp_path / f"{trial_stem('S01', 'T01')}.csv", {
        "biz": make_series(np.zeros(n)),
        "ecg": make_series(np.zeros(n), kind=SeriesKind.ECG),
    })
    with pytest.raises(InvalidLabels) as info:
        feature_table_from_series([path], {}, PipelineConfig(), threads=1)
    assert info.value.details["subject_id"] == "S01"


def test_render_reports_without_colors(informative_table):
    report = cross_validate(informative_table, ModelSettings(kind=ModelKind.LR), CvConfig(n_folds=3))
    text = render_reports([report], colors=False)
    assert "\033[" not in text
    assert "LR SBP" in text
    assert "BHS grading" in text
    assert report.bhs_grade in text


# ----- error reporting -----

def test_missing_input_exits_with_stage(tmp_path, capsys):
    code = main(["demod", str(tmp_path / "absent.csv"), "--out-dir", str(tmp_path / "out"), "--no-color"])
    payload = _error_payload(capsys)
    assert code == 14
    assert payload["stage"] == "dataset-io"
    assert payload["error"] == "IoFailure"
    assert payload["status"] == "error"


def test_bad_enum_in_manifest_exits_with_cli_stage(tmp_path, capsys):
    config = PipelineConfig().to_dict()
    config["sections"]["preprocess"]["fir_design"] = "bogus"
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"config": config}), encoding="utf-8")
    code = main(["pipeline", "--manifest", str(manifest), "--out-dir", str(tmp_path / "out"), "--no-color"])
    payload = _error_payload(capsys)
    assert code == 2
    assert payload["stage"] == "cli"
    assert payload["error"] == "InvalidConfigFile"
    assert payload["details"]["key"] == "preprocess.fir_design"


def test_bad_config_file_exits_with_cli_stage(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("model.n_trees=7\n", encoding="utf-8")
    code = main(["evaluate", "--table", str(tmp_path / "t.csv"), "--config", str(bad),
                 "--out-dir", str(tmp_path / "out")])
    assert code == 2
    assert _error_payload(capsys)["stage"] == "cli"


# ----- staged commands -----

def test_staged_commands(tmp_path, tiny_config):
    out = tmp_path / "run"
    common = ["--config", str(tiny_config), "--out-dir", str(out), "--no-color", "--target", "sbp"]

    assert main(["synth", "--subjects", "1", "--trials", "2", "--duration", "16", "--noise-free", *common]) == 0
    raw = sorted((out / "raw").glob("*.csv"))
    assert [p.name for p in raw] == ["S01__T01.csv", "S01__T02.csv"]
    assert len(sorted((out / "truth").glob("*.json"))) == 2

    assert main(["demod", *map(str, raw), *common]) == 0
    demod = sorted((out / "demod").glob("*.csv"))
    assert len(demod) == 2

    assert main(["preprocess", *map(str, demod), *common]) == 0
    series = sorted((out / "preprocessed").glob("*.csv"))

    assert main(["extract", *map(str, series), "--from", "series", "--labels", str(out / "labels.csv"), *common]) == 0
    table = load_feature_table(out / "features.csv")
    # 16 s trials with 8 s windows stepped by 2 s
    assert len(table) == 10
    assert table.valid.sum() >= 8

    assert main(["select", "--table", str(out / "features.csv"), "--k", "5", *common]) == 0
    selected = load_feature_table(out / "features_sbp_top5.csv")
    assert len(selected.feature_names) == 5

    assert main(["train", "--table", str(out / "features_sbp_top5.csv"), "--kind", "lr", *common]) == 0
    model = load_model(out / "model_lr_sbp.json")
    assert model.feature_names == selected.feature_names
    assert model.provenance["target"] == "sbp"

    assert main(["evaluate", "--table", str(out / "features.csv"), "--kind", "dt", *common]) == 0
    report = report_from_dict(json.loads((out / "report_dt_sbp.json").read_text(encoding="utf-8")))
    assert report.n_rows == table.valid.sum()
    assert (out / "plots" / "sbp_dt_bland_altman.csv").exists()

    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "evaluate"
    assert manifest["config"]["sections"]["model"]["kind"] == "dt"


def test_demod_and_preprocess_flags_reach_outputs(tmp_path, tiny_config):
    out = tmp_path / "run"
    common = ["--config", str(tiny_config), "--out-dir", str(out), "--no-color"]
    assert main(["synth", "--subjects", "1", "--trials", "1", "--duration", "16", "--noise-free", *common]) == 0
    raw = sorted((out / "raw").glob("*.csv"))

    assert main(["demod", *map(str, raw), "--kinds", "abs", "--excitation-hz", "2500", *common]) == 0
    demod = sorted((out / "demod").glob("*.csv"))
    series = load_series(demod[0])
    assert set(series) == {"biz_abs", "ecg"}
    assert "f_exc=2500" in series["biz_abs"].processing_log[0]
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["stages"][0]["kinds"] == ["abs"]

    assert main(["preprocess", *map(str, demod), "--fir-order", "400", "--fir-design", "windowed_sinc",
                 "--sg-window", "801", "--sg-mode-ecg", "smooth", "--window-s", "4", "--overlap", "0.5",
                 *common]) == 0
    processed = load_series(out / "preprocessed" / demod[0].name)
    assert processed["biz"].processing_log[-2:] == ("fir:taps=401,edges=reflect",
                                                    "sg:mode=detrend,poly=3,window=801")
    assert processed["ecg"].processing_log[-1] == "sg:mode=smooth,poly=3,window=801"
    stage = json.loads((out / "manifest.json").read_text(encoding="utf-8"))["stages"][0]
    # 16 s at 500 Hz in 4 s windows stepped by 2 s
    assert stage["n_windows"] == 7
    assert stage["fir_design"] == "windowed_sinc"


def test_series_bundle_without_abs_is_rejected(tmp_path, tiny_config, capsys):
    n = 5000
    path = save_series(tmp_path / "imag_only.csv", {
        "biz_imag": make_series(np.zeros(n), kind=SeriesKind.BIOZ_IMAG),
        "ecg": make_series(np.zeros(n), kind=SeriesKind.ECG),
    })
    code = main(["preprocess", str(path), "--config", str(tiny_config), "--out-dir", str(tmp_path / "out"),
                 "--no-color"])
    payload = _error_payload(capsys)
    assert code == 11
    assert payload["error"] == "MissingHeaderField"
    assert payload["details"]["field"] == "biz_abs"


# ----- end to end -----

@pytest.fixture(scope="module")
def tiny_runs(tmp_path_factory, tiny_config):
    root = tmp_path_factory.mktemp("pipeline")
    args = ["pipeline", "--config", str(tiny_config), "--subjects", "2", "--trials", "3", "--duration", "16",
            "--noise-free", "--seed", "5", "--target", "sbp", "--no-color"]
    runs = []
    for name in ("first", "second"):
        out = root / name
        assert main([*args, "--out-dir", str(out)]) == 0
        runs.append(out)
    return runs


def test_pipeline_is_byte_reproducible(tiny_runs):
    first, second = tiny_runs
    for name in ("report.txt", "manifest.json", "features.csv", "report_rf_sbp.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_pipeline_manifest(tiny_runs):
    manifest = json.loads((tiny_runs[0] / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["seed"] == 5
    assert [s["stage"] for s in manifest["stages"]] == ["features", "featsel", "eval"]
    table = load_feature_table(tiny_runs[0] / "features.csv")
    assert manifest["stages"][0]["n_excluded_cycles"] == int(table.n_excluded_cycles.sum())
    kinds = {a["kind"] for a in manifest["artifacts"]}
    assert {"feature_table", "ranking", "report", "plot_table", "report_text"} <= kinds
    assert all(not a["path"].startswith("/") for a in manifest["artifacts"])


def test_manifest_replay_reproduces_report(tiny_runs, tmp_path):
    first = tiny_runs[0]
    out = tmp_path / "replay"
    assert main(["pipeline", "--manifest", str(first / "manifest.json"), "--out-dir", str(out), "--no-color"]) == 0
    assert (out / "report.txt").read_bytes() == (first / "report.txt").read_bytes()
    assert (out / "manifest.json").read_bytes() == (first / "manifest.json").read_bytes()


@pytest.mark.slow
def test_synthetic_cohort_meets_accuracy(tmp_path):
    config = tmp_path / "cohort.cfg"
    config.write_text(TINY_CONFIG.replace("model.n_trees=10", "model.n_trees=100")
                      .replace("eval.n_folds=5", "eval.n_folds=10")
                      .replace("runtime.threads=1", "runtime.threads=0"), encoding="utf-8")
    out = tmp_path / "cohort"
    assert main(["pipeline", "--config", str(config), "--subjects", "13", "--trials", "10",
                 "--target", "sbp", "--out-dir", str(out), "--no-color"]) == 0
    report = report_from_dict(json.loads((out / "report_rf_sbp.json").read_text(encoding="utf-8")))
    assert report.metrics.mae <= 4.0
    assert report.metrics.r >= 0.9
