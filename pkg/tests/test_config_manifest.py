import hashlib
import json
from pathlib import PurePosixPath

import pytest

from brainz_bp import errors
from brainz_bp.config import CHOICES, MANIFEST_VERSION, PipelineConfig, load_config_file, resolve_config
from brainz_bp.dataset_io import RawFormat
from brainz_bp.errors import BrainzError, InvalidConfigFile, NonFiniteSample
from brainz_bp.evaluation import SplitUnit
from brainz_bp.featsel import RankMethod
from brainz_bp.manifest import RunEventType, RunRecorder, load_manifest
from brainz_bp.models import ModelKind
from brainz_bp.preprocess import FirDesign, FirWindow, SgMode


# ----- configuration -----

def test_overrides_are_coerced():
    config = PipelineConfig().with_overrides({
        "model.n_trees": "25",
        "model.bootstrap": "false",
        "featsel.k_grid": "1, 2, 3",
        "synth.duration_s": 16,
        "runtime.seed": None,
    })
    assert config.get("model.n_trees") == 25
    assert config.get("model.bootstrap") is False
    assert config.get("featsel.k_grid") == (1, 2, 3)
    assert config.get("synth.duration_s") == 16.0
    assert config.seed == PipelineConfig().seed


def test_overrides_do_not_touch_the_original():
    base = PipelineConfig().with_overrides({"model.n_trees": 4})
    base.with_overrides({"model.n_trees": 3})
    assert base.get("model.n_trees") == 4


@pytest.mark.parametrize("overrides", [
    {"model.no_such_key": 1},
    {"nosection.n_trees": 1},
    {"n_trees": 1},
    {"model.n_trees": "many"},
    {"model.bootstrap": "maybe"},
])
def test_bad_overrides(overrides):
    with pytest.raises(InvalidConfigFile):
        PipelineConfig().with_overrides(overrides)


@pytest.mark.parametrize("overrides", [
    {"preprocess.fir_design": "bogus"},
    {"preprocess.sg_mode_ecg": "Detrend"},
    {"model.kind": "knn"},
    {"eval.split_unit": "fold"},
    {"runtime.target": "map"},
    {"demod.kinds": "abs,phase"},
    {"eval.compare_kinds": "lr,gbm"},
    {"demod.n_block": 0},
    {"model.n_trees": -5},
    {"preprocess.overlap_fraction": 1.0},
])
def test_invalid_values_are_config_errors(overrides):
    with pytest.raises(InvalidConfigFile) as info:
        PipelineConfig().with_overrides(overrides)
    assert info.value.details["key"] == next(iter(overrides))
    assert info.value.stage == "cli"


@pytest.mark.parametrize("key, enum", [
    ("preprocess.fir_window", FirWindow),
    ("preprocess.fir_design", FirDesign),
    ("preprocess.sg_mode_biz", SgMode),
    ("preprocess.sg_mode_ecg", SgMode),
    ("featsel.method", RankMethod),
    ("model.kind", ModelKind),
    ("eval.compare_kinds", ModelKind),
    ("eval.split_unit", SplitUnit),
    ("runtime.format", RawFormat),
])
def test_choices_follow_enums(key, enum):
    assert set(CHOICES[key]) == {member.value for member in enum}


def test_manifest_with_bad_enum_is_config_error():
    data = PipelineConfig().to_dict()
    data["sections"]["preprocess"]["fir_design"] = "bogus"
    with pytest.raises(InvalidConfigFile):
        resolve_config(manifest=data)


def test_config_dict_round_trip():
    config = PipelineConfig().with_overrides({"model.kind": "svr", "eval.n_folds": 5})
    restored = PipelineConfig.from_dict(json.loads(json.dumps(config.to_dict())))
    assert restored.sections == config.sections
    assert restored.to_dict() == config.to_dict()


def test_config_dict_needs_version():
    data = PipelineConfig().to_dict()
    data["manifest_version"] = "0"
    with pytest.raises(InvalidConfigFile):
        PipelineConfig.from_dict(data)


def test_threads_resolve_to_a_positive_count():
    assert PipelineConfig().with_overrides({"runtime.threads": 0}).threads >= 1
    assert PipelineConfig().with_overrides({"runtime.threads": 3}).threads == 3


def _config_file(tmp_path, text):
    path = tmp_path / "brainz.cfg"
    path.write_text(text, encoding="utf-8")
    return path


def test_config_file_values(tmp_path):
    path = _config_file(tmp_path, f"manifest_version={MANIFEST_VERSION}\nmodel.n_trees=7\nmodel.kind=dt\n")
    assert load_config_file(path) == {"model.n_trees": "7", "model.kind": "dt"}


def test_flags_win_over_config_file(tmp_path):
    path = _config_file(tmp_path, f"manifest_version={MANIFEST_VERSION}\nmodel.n_trees=7\nmodel.kind=dt\n")
    config = resolve_config(path, {"model.n_trees": 9})
    assert config.get("model.n_trees") == 9
    assert config.get("model.kind") == "dt"


def test_manifest_config_is_replayed():
    recorded = PipelineConfig().with_overrides({"runtime.seed": 42}).to_dict()
    assert resolve_config(manifest=recorded).seed == 42


def test_config_file_without_version(tmp_path):
    with pytest.raises(InvalidConfigFile) as info:
        load_config_file(_config_file(tmp_path, "model.n_trees=7\n"))
    assert info.value.stage == "cli"
    assert info.value.exit_code == 2


def test_missing_config_file(tmp_path):
    with pytest.raises(InvalidConfigFile):
        load_config_file(tmp_path / "absent.cfg")


# ----- errors -----

def _all_errors(cls=BrainzError):
    for sub in cls.__subclasses__():
        yield sub
        yield from _all_errors(sub)


def test_exit_codes_are_distinct():
    codes = [cls.exit_code for cls in _all_errors()]
    assert len(codes) == len(set(codes))
    assert 1 not in codes


def test_error_payload():
    exc = NonFiniteSample("NaN in vr", row=7, column="vr")
    payload = exc.to_payload()
    assert payload == {
        "status": "error",
        "stage": "dataset-io",
        "error": "NonFiniteSample",
        "message": "NaN in vr",
        "details": {"row": 7, "column": "vr"},
    }


def test_stage_can_be_overridden():
    exc = errors.IoFailure("cannot write", stage="regress", path=PurePosixPath("out/model.json"))
    assert exc.stage == "regress"
    assert errors.IoFailure.stage == "dataset-io"
    assert exc.to_payload()["details"]["path"] == "out/model.json"


# ----- manifest -----

def _record(out_dir):
    recorder = RunRecorder("pipeline", PipelineConfig().to_dict(), root=out_dir)
    recorder.stage_started("features")
    table = out_dir / "features.csv"
    table.write_text("group_id,segment_index\nS01/T01,0\n", encoding="utf-8")
    recorder.artifact("features", table, "feature_table")
    recorder.rows_flagged("features", 2, {"TooFewPeaks": 1, "NoPeaksFound": 1})
    recorder.stage_completed("features", n_rows=1, features=("PAT", "HR"))
    return recorder


def test_manifest_contents(tmp_path):
    recorder = _record(tmp_path)
    manifest = load_manifest(recorder.write(tmp_path / "manifest.json"))
    assert manifest["command"] == "pipeline"
    assert manifest["seed"] == manifest["config"]["sections"]["runtime"]["seed"]
    artifact = manifest["artifacts"][0]
    assert artifact["path"] == "features.csv"
    assert artifact["sha256"] == hashlib.sha256((tmp_path / "features.csv").read_bytes()).hexdigest()
    assert manifest["stages"] == [{"sequence": 3, "stage": "features", "n_rows": 1, "features": ["PAT", "HR"]}]
    assert manifest["flagged"][0]["reasons"] == {"NoPeaksFound": 1, "TooFewPeaks": 1}
    assert set(manifest["versions"]) >= {"brainz_bp", "numpy", "scipy", "pandas", "joblib"}


def test_manifest_is_byte_identical_across_runs(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    first.mkdir()
    second.mkdir()
    a = _record(first).write(first / "manifest.json")
    b = _record(second).write(second / "manifest.json")
    assert a.read_bytes() == b.read_bytes()


def test_event_bus_counts(tmp_path):
    bus = _record(tmp_path).bus
    assert bus.get_metrics()["total_events"] == 4
    assert [e.sequence for e in bus.get_events()] == [0, 1, 2, 3]
    assert len(bus.get_events(RunEventType.ARTIFACT_WRITTEN)) == 1
    assert bus.get_events(limit=1)[0].event_type is RunEventType.STAGE_COMPLETED
