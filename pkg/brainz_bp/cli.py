"""
Command-line entry point.

Every command resolves its configuration (defaults, environment, optional
config file or manifest, then flags), runs its stages and writes
``manifest.json`` next to its artifacts. Failures print a JSON error payload
naming the stage on stderr and exit with the error's own code.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import pandas as pd
from joblib import Parallel, delayed

from . import __version__
from .config import PipelineConfig, colors_enabled, get_env_config, resolve_config
from .dataset_io import (RawFormat, load_feature_table, load_labels, load_raw, load_series, save_feature_table,
                         save_labels, save_raw, save_series)
from .errors import BrainzError, IoFailure
from .evaluation import (CvConfig, EvalReport, compare_models, export_plots, report_from_dict, report_to_dict,
                         sweep_n_trees)
from .featsel import RankMethod, rank_features, ranking_to_frame, select_top_k, sweep_top_k
from .manifest import RunRecorder, load_manifest
from .models import ModelKind, ModelSettings, save_model, train_model
from .preprocess import FirDesign, FirWindow, SgMode, window_geometry
from .pipeline import (StageSettings, cohort_plan, demodulated, feature_table_from_files, feature_table_from_series,
                       filtered, synthetic_feature_table, trial_stem)
from .synthgen import CohortTrial, generate
from .utils import Colors, banner, format_mean_sd, format_table, paint

logger = logging.getLogger(__name__)

K_KEYS = {"rf_impurity": "k", "pcc": "pcc_k", "combined": "combined_k"}


# ===== Argument parsing =====

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="Global seed")
    common.add_argument("--threads", type=int, help="Worker count (0 = all cores)")
    common.add_argument("--format", choices=["csv", "bin"], help="Raw recording format")
    common.add_argument("--target", choices=["sbp", "dbp", "both"], help="Blood-pressure target(s)")
    common.add_argument("--config", type=Path, help="Versioned key-value config file")
    common.add_argument("--manifest", type=Path, help="Replay the configuration of an earlier run")
    common.add_argument("--log-level", help="Logging level (default from LOG_LEVEL)")
    common.add_argument("--no-color", action="store_true", help="Disable ANSI colors")
    common.add_argument("--out-dir", type=Path, default=Path("out"), help="Artifact directory")

    demod_flags = argparse.ArgumentParser(add_help=False)
    demod_flags.add_argument("--n-block", type=int, help="Carrier samples averaged per output sample")
    demod_flags.add_argument("--excitation-hz", type=float,
                             help="Excitation frequency in Hz (0 or omitted = from each recording header)")

    filter_flags = argparse.ArgumentParser(add_help=False)
    filter_flags.add_argument("--fir-order", type=int, help="FIR band-pass order")
    filter_flags.add_argument("--fir-low-hz", type=float, help="FIR lower cut-off in Hz")
    filter_flags.add_argument("--fir-high-hz", type=float, help="FIR upper cut-off in Hz")
    filter_flags.add_argument("--fir-design", choices=[d.value for d in FirDesign])
    filter_flags.add_argument("--fir-window", choices=[w.value for w in FirWindow])
    filter_flags.add_argument("--sg-order", type=int, help="Savitzky-Golay polynomial order")
    filter_flags.add_argument("--sg-window", type=int, help="Savitzky-Golay window length in samples (odd)")
    filter_flags.add_argument("--sg-mode-biz", choices=[m.value for m in SgMode])
    filter_flags.add_argument("--sg-mode-ecg", choices=[m.value for m in SgMode])

    window_flags = argparse.ArgumentParser(add_help=False)
    window_flags.add_argument("--window-s", type=float, help="Segment length in seconds")
    window_flags.add_argument("--overlap", type=float, help="Fraction of overlap between segments, in [0, 1)")

    noise_flags = argparse.ArgumentParser(add_help=False)
    noise_flags.add_argument("--snr-db", type=float,
                             help="Carrier and ECG SNR in dB; every value, 0 included, adds noise")
    noise_flags.add_argument("--noise-free", action="store_true", default=None,
                             help="Generate without noise (--snr-db is then ignored)")

    parser = argparse.ArgumentParser(prog="brainz-bp", description="Cuff-less BP estimation from brain bio-impedance")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", parents=[common, noise_flags], help="Generate a synthetic cohort of raw trials")
    synth.add_argument("--subjects", type=int)
    synth.add_argument("--trials", type=int)
    synth.add_argument("--duration", type=float, help="Trial duration in seconds")

    demod = sub.add_parser("demod", parents=[common, demod_flags],
                           help="Demodulate raw trials to |Z|, Re Z, Im Z and ECG")
    demod.add_argument("inputs", nargs="+", type=Path)
    demod.add_argument("--kinds", help="Comma-separated impedance series to write: abs, real, imag")

    pre = sub.add_parser("preprocess", parents=[common, filter_flags, window_flags],
                         help="FIR band-pass and SG detrend demodulated series")
    pre.add_argument("inputs", nargs="+", type=Path)

    extract = sub.add_parser("extract", parents=[common, demod_flags, filter_flags, window_flags],
                             help="Segment trials and extract the 42 features")
    extract.add_argument("inputs", nargs="+", type=Path)
    extract.add_argument("--labels", type=Path, required=True)
    extract.add_argument("--from", dest="source", choices=["raw", "series"], default="raw")

    select = sub.add_parser("select", parents=[common], help="Rank features and keep the top k")
    select.add_argument("--table", type=Path, required=True)
    select.add_argument("--method", choices=[m.value for m in RankMethod])
    select.add_argument("--k", type=int)

    train = sub.add_parser("train", parents=[common], help="Train one regressor per target")
    train.add_argument("--table", type=Path, required=True)
    train.add_argument("--kind", choices=[k.value for k in ModelKind])

    evaluate = sub.add_parser("evaluate", parents=[common], help="Cross-validate regressors")
    evaluate.add_argument("--table", type=Path, required=True)
    evaluate.add_argument("--kind", choices=[k.value for k in ModelKind])
    evaluate.add_argument("--compare", action="store_true", help="Evaluate LR, SVR, DT and RF on the same folds")
    evaluate.add_argument("--split-unit", choices=["segment", "trial", "subject"])
    evaluate.add_argument("--sweep-trees", action="store_true", help="Also sweep the forest size")
    evaluate.add_argument("--sweep-k", choices=[m.value for m in RankMethod], help="Also sweep top-k by a ranking")

    report = sub.add_parser("report", parents=[common], help="Render evaluation reports as tables")
    report.add_argument("inputs", nargs="+", type=Path)

    pipeline = sub.add_parser("pipeline", parents=[common, demod_flags, filter_flags, window_flags, noise_flags],
                              help="Run everything from raw trials to reports")
    pipeline.add_argument("--raw-dir", type=Path, help="Raw trials; a synthetic cohort is used when omitted")
    pipeline.add_argument("--labels", type=Path)
    pipeline.add_argument("--method", choices=[m.value for m in RankMethod])
    pipeline.add_argument("--k", type=int)
    pipeline.add_argument("--kind", choices=[k.value for k in ModelKind])
    pipeline.add_argument("--subjects", type=int)
    pipeline.add_argument("--trials", type=int)
    pipeline.add_argument("--duration", type=float)
    return parser


def flag_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """``section.key`` overrides from the flags that were given."""
    mapping = {
        "seed": "runtime.seed",
        "threads": "runtime.threads",
        "format": "runtime.format",
        "target": "runtime.target",
        "subjects": "synth.n_subjects",
        "trials": "synth.n_trials",
        "duration": "synth.duration_s",
        "snr_db": "synth.noise_snr_db",
        "noise_free": "synth.noise_free",
        "n_block": "demod.n_block",
        "excitation_hz": "demod.excitation_freq_hz",
        "kinds": "demod.kinds",
        "fir_order": "preprocess.fir_order",
        "fir_low_hz": "preprocess.fir_low_hz",
        "fir_high_hz": "preprocess.fir_high_hz",
        "fir_design": "preprocess.fir_design",
        "fir_window": "preprocess.fir_window",
        "sg_order": "preprocess.sg_poly_order",
        "sg_window": "preprocess.sg_window_len",
        "sg_mode_biz": "preprocess.sg_mode_biz",
        "sg_mode_ecg": "preprocess.sg_mode_ecg",
        "window_s": "preprocess.window_s",
        "overlap": "preprocess.overlap_fraction",
        "method": "featsel.method",
        "kind": "model.kind",
        "split_unit": "eval.split_unit",
    }
    return {key: getattr(args, name) for name, key in mapping.items() if getattr(args, name, None) is not None}


def configure_logging(level: Optional[str]) -> None:
    logging.basicConfig(
        level=(level or get_env_config()["log_level"]).upper(),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


# ===== Helpers =====

def _targets(config: PipelineConfig) -> List[str]:
    target = config.get("runtime.target")
    return ["sbp", "dbp"] if target == "both" else [target]


def _raw_format(config: PipelineConfig) -> RawFormat:
    return RawFormat(config.get("runtime.format"))


def _require(paths: Sequence[Path]) -> List[Path]:
    for path in paths:
        if not Path(path).exists():
            raise IoFailure(f"Input not found: {path}", path=str(path))
    return [Path(p) for p in paths]


def _k(config: PipelineConfig, method: RankMethod) -> int:
    return int(config.get(f"featsel.{K_KEYS[method.value]}"))


def _cv(config: PipelineConfig, target: str) -> CvConfig:
    return CvConfig.from_sections(config.sections, target)


def _write_csv(frame: pd.DataFrame, path: Path, recorder: RunRecorder, stage: str, kind: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g")
    return recorder.artifact(stage, path, kind)


def _write_json(data: Any, path: Path, recorder: RunRecorder, stage: str, kind: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return recorder.artifact(stage, path, kind)


def _flag_rows(table, recorder: RunRecorder) -> None:
    reasons: Dict[str, int] = {}
    for valid, text in zip(table.valid, table.reasons):
        if not valid:
            for reason in text.split(";"):
                reasons[reason] = reasons.get(reason, 0) + 1
    recorder.rows_flagged("features", int((~table.valid).sum()), reasons)
    excluded = int(table.n_excluded_cycles.sum())
    if excluded:
        logger.info("%d cycles excluded from per-cycle averages", excluded)


def render_reports(reports: Sequence[EvalReport], colors: bool = True) -> str:
    """Text tables: regression performance, AAMI compliance and BHS grades."""
    performance, aami, bhs = [], [], []
    for r in reports:
        name = f"{r.model_kind.upper()} {r.target.upper()}"
        performance.append([
            name,
            format_mean_sd(*r.fold_summary("me")),
            format_mean_sd(*r.fold_summary("mae")),
            format_mean_sd(*r.fold_summary("rmse")),
            format_mean_sd(*r.fold_summary("r"), digits=3),
            r.n_rows,
        ])
        aami.append([name, r.metrics.me, r.metrics.rmse, r.n_rows, r.aami_pass])
        grade = r.bhs_grade if not colors else paint(r.bhs_grade, Colors.GREEN if r.bhs_grade == "A" else Colors.YELLOW)
        bhs.append([name, r.cp5, r.cp10, r.cp15, grade])
    lines = banner("BrainZ-BP evaluation", colors)
    lines.append(format_table(["Model", "ME", "MAE", "RMSE", "R", "Rows"], performance,
                              "Cross-validated performance (mean ± SD over folds, mmHg)"))
    lines.append(format_table(["Model", "ME", "RMSE", "Rows", "AAMI"], aami, "AAMI (|ME| ≤ 5, SD ≤ 8 mmHg)"))
    lines.append(format_table(["Model", "CP5 %", "CP10 %", "CP15 %", "Grade"], bhs, "BHS grading"))
    return "\n\n".join(lines)


# ===== Commands =====

def _synth_one(trial: CohortTrial, duration_s: float, raw_dir: Path, truth_dir: Path, fmt: RawFormat):
    rec, truth = generate(trial.config, duration_s, trial.subject_id, trial.trial_id)
    stem = trial_stem(trial.subject_id, trial.trial_id)
    raw_path = save_raw(rec, raw_dir / f"{stem}.{fmt.value}", fmt)
    truth_path = truth_dir / f"{stem}.json"
    truth_path.write_text(json.dumps(truth.to_dict(), sort_keys=True) + "\n", encoding="utf-8")
    key = (trial.subject_id, trial.trial_id)
    return key, (float(truth.true_sbp_mmhg[0]), float(truth.true_dbp_mmhg[0])), raw_path, truth_path


def cmd_synth(args, config: PipelineConfig, recorder: RunRecorder, out_dir: Path, colors: bool) -> None:
    recorder.stage_started("synthgen")
    fmt = _raw_format(config)
    raw_dir, truth_dir = out_dir / "raw", out_dir / "truth"
    raw_dir.mkdir(parents=True, exist_ok=True)
    truth_dir.mkdir(parents=True, exist_ok=True)
    plan = cohort_plan(config)
    duration = float(config.get("synth.duration_s"))
    results = Parallel(n_jobs=config.threads)(
        delayed(_synth_one)(trial, duration, raw_dir, truth_dir, fmt) for trial in plan
    )
    labels = {}
    for key, label, raw_path, truth_path in results:
        labels[key] = label
        recorder.artifact("synthgen", raw_path, "raw")
        recorder.artifact("synthgen", truth_path, "ground_truth")
    recorder.artifact("synthgen", save_labels(out_dir / "labels.csv", labels), "labels")
    recorder.stage_completed("synthgen", n_trials=len(plan), duration_s=duration)
    print(paint(f"✅ Generated {len(plan)} synthetic trials in {raw_dir}", Colors.GREEN, enabled=colors))


def cmd_demod(args, config: PipelineConfig, recorder: RunRecorder, out_dir: Path, colors: bool) -> None:
    recorder.stage_started("demod")
    settings = StageSettings.from_config(config)
    fmt = _raw_format(config)
    for path in _require(args.inputs):
        rec = load_raw(path, fmt)
        demod = demodulated(rec, settings)
        series = {f"biz_{kind}": demod[f"biz_{kind}"] for kind in settings.kinds}
        series["ecg"] = demod["ecg"]
        target = out_dir / "demod" / f"{trial_stem(rec.subject_id, rec.trial_id)}.csv"
        recorder.artifact("demod", save_series(target, series), "series")
    recorder.stage_completed("demod", n_trials=len(args.inputs), kinds=list(settings.kinds))
    print(paint(f"✅ Demodulated {len(args.inputs)} trials", Colors.GREEN, enabled=colors))


def cmd_preprocess(args, config: PipelineConfig, recorder: RunRecorder, out_dir: Path, colors: bool) -> None:
    recorder.stage_started("preprocess")
    settings = StageSettings.from_config(config)
    n_windows = 0
    for path in _require(args.inputs):
        biz, ecg = filtered(load_series(path), settings)
        n_windows += window_geometry(len(biz), biz.sample_rate_hz, settings.window)[2]
        target = out_dir / "preprocessed" / path.name
        recorder.artifact("preprocess", save_series(target, {"biz": biz, "ecg": ecg}), "series")
    recorder.stage_completed("preprocess", n_trials=len(args.inputs), n_windows=n_windows,
                             fir_design=settings.fir.design.value, sg_window_len=settings.sg.window_len)
    print(paint(f"✅ Preprocessed {len(args.inputs)} trials", Colors.GREEN, enabled=colors))


def cmd_extract(args, config: PipelineConfig, recorder: RunRecorder, out_dir: Path, colors: bool) -> None:
    recorder.stage_started("features")
    paths = _require(args.inputs)
    labels = load_labels(_require([args.labels])[0])
    if args.source == "series":
        table = feature_table_from_series(paths, labels, config)
    else:
        table = feature_table_from_files(paths, labels, config, _raw_format(config))
    _flag_rows(table, recorder)
    recorder.artifact("features", save_feature_table(table, out_dir / "features.csv"), "feature_table")
    recorder.stage_completed("features", n_rows=len(table), n_valid=int(table.valid.sum()),
                             n_excluded_cycles=int(table.n_excluded_cycles.sum()))
    print(paint(f"✅ Extracted {len(table)} segments ({int(table.valid.sum())} valid)", Colors.GREEN, enabled=colors))


def _select(table, config: PipelineConfig, target: str, recorder: RunRecorder, out_dir: Path):
    method = RankMethod(config.get("featsel.method"))
    k = _k(config, method)
    settings = ModelSettings.from_sections(config.sections, config.threads)
    ranking = rank_features(table, method, target, settings.forest, config.seed, k, config.threads)
    _write_csv(ranking_to_frame(ranking), out_dir / f"ranking_{target}_{method.value}.csv", recorder,
               "featsel", "ranking")
    selected = select_top_k(table, ranking, k)
    recorder.artifact("featsel", save_feature_table(selected, out_dir / f"features_{target}_top{k}.csv"),
                      "feature_table")
    return selected


def cmd_select(args, config: PipelineConfig, recorder: RunRecorder, out_dir: Path, colors: bool) -> None:
    recorder.stage_started("featsel")
    table = load_feature_table(_require([args.table])[0])
    for target in _targets(config):
        selected = _select(table, config, target, recorder, out_dir)
        print(paint(f"✅ {target.upper()}: kept {', '.join(selected.feature_names)}", Colors.GREEN, enabled=colors))
    recorder.stage_completed("featsel", method=config.get("featsel.method"))


def cmd_train(args, config: PipelineConfig, recorder: RunRecorder, out_dir: Path, colors: bool) -> None:
    recorder.stage_started("regress")
    table = load_feature_table(_require([args.table])[0]).valid_rows()
    settings = ModelSettings.from_sections(config.sections, config.threads)
    for target in _targets(config):
        model = train_model(table.features, table.target(target), settings, table.feature_names)
        model.provenance.update({"target": target, **{f"table_{k}": v for k, v in table.provenance.items()}})
        path = save_model(model, out_dir / f"model_{settings.kind.value}_{target}.json")
        recorder.artifact("regress", path, "model")
        print(paint(f"✅ Trained {settings.kind.value} for {target.upper()} → {path}", Colors.GREEN, enabled=colors))
    recorder.stage_completed("regress", kind=settings.kind.value)


def _evaluate(table, config: PipelineConfig, kinds: Sequence[str], target: str, recorder: RunRecorder,
              out_dir: Path) -> List[EvalReport]:
    settings = ModelSettings.from_sections(config.sections, 1)
    cv = _cv(config, target)
    reports = compare_models(table, kinds, settings, cv, config.threads, config.section("eval"))
    for kind, report in reports.items():
        _write_json(report_to_dict(report), out_dir / f"report_{kind}_{target}.json", recorder, "eval", "report")
        for path in export_plots(report, out_dir / "plots", float(config.get("eval.histogram_bin_mmhg"))).values():
            recorder.artifact("eval", path, "plot_table")
    return list(reports.values())


def cmd_evaluate(args, config: PipelineConfig, recorder: RunRecorder, out_dir: Path, colors: bool) -> None:
    recorder.stage_started("eval")
    table = load_feature_table(_require([args.table])[0])
    kinds = list(config.get("eval.compare_kinds")) if args.compare else [config.get("model.kind")]
    reports: List[EvalReport] = []
    settings = ModelSettings.from_sections(config.sections, 1)
    for target in _targets(config):
        reports.extend(_evaluate(table, config, kinds, target, recorder, out_dir))
        if args.sweep_trees:
            curve = sweep_n_trees(table, config.get("model.n_trees_grid"), settings, _cv(config, target),
                                  config.threads)
            _write_csv(curve, out_dir / f"sweep_trees_{target}.csv", recorder, "eval", "sweep")
        if args.sweep_k:
            grid = [k for k in config.get("featsel.k_grid") if k <= len(table.feature_names)]
            curve = sweep_top_k(table, RankMethod(args.sweep_k), grid, settings, _cv(config, target), config.threads)
            _write_csv(curve, out_dir / f"sweep_k_{target}_{args.sweep_k}.csv", recorder, "featsel", "sweep")
    text = render_reports(reports, colors)
    (out_dir / "report.txt").write_text(render_reports(reports, False) + "\n", encoding="utf-8")
    recorder.artifact("eval", out_dir / "report.txt", "report_text")
    recorder.stage_completed("eval", n_reports=len(reports))
    print(text)


def cmd_report(args, config: PipelineConfig, recorder: RunRecorder, out_dir: Path, colors: bool) -> None:
    recorder.stage_started("eval")
    reports = [report_from_dict(json.loads(p.read_text(encoding="utf-8"))) for p in _require(args.inputs)]
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(render_reports(reports, False) + "\n", encoding="utf-8")
    recorder.artifact("eval", out_dir / "report.txt", "report_text")
    recorder.stage_completed("eval", n_reports=len(reports))
    print(render_reports(reports, colors))


def cmd_pipeline(args, config: PipelineConfig, recorder: RunRecorder, out_dir: Path, colors: bool) -> None:
    recorder.stage_started("features")
    if args.raw_dir is not None:
        fmt = _raw_format(config)
        paths = sorted(_require([args.raw_dir])[0].glob(f"*.{fmt.value}"))
        if not paths:
            raise IoFailure(f"No .{fmt.value} trials in {args.raw_dir}", path=str(args.raw_dir))
        if args.labels is None:
            raise IoFailure("--labels is required with --raw-dir")
        table = feature_table_from_files(paths, load_labels(_require([args.labels])[0]), config, fmt)
    else:
        table = synthetic_feature_table(config)
    _flag_rows(table, recorder)
    recorder.artifact("features", save_feature_table(table, out_dir / "features.csv"), "feature_table")
    recorder.stage_completed("features", n_rows=len(table), n_valid=int(table.valid.sum()),
                             n_excluded_cycles=int(table.n_excluded_cycles.sum()))

    reports: List[EvalReport] = []
    for target in _targets(config):
        recorder.stage_started("featsel", target=target)
        selected = _select(table, config, target, recorder, out_dir)
        recorder.stage_completed("featsel", target=target, features=list(selected.feature_names))
        recorder.stage_started("eval", target=target)
        reports.extend(_evaluate(selected, config, [config.get("model.kind")], target, recorder, out_dir))
        recorder.stage_completed("eval", target=target)
    (out_dir / "report.txt").write_text(render_reports(reports, False) + "\n", encoding="utf-8")
    recorder.artifact("eval", out_dir / "report.txt", "report_text")
    print(render_reports(reports, colors))


HANDLERS: Dict[str, Callable[..., None]] = {
    "synth": cmd_synth,
    "demod": cmd_demod,
    "preprocess": cmd_preprocess,
    "extract": cmd_extract,
    "select": cmd_select,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "pipeline": cmd_pipeline,
}


def run(command: str, config: PipelineConfig, args: argparse.Namespace) -> int:
    """Execute ``command`` and write its manifest; returns the process exit status."""
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    colors = colors_enabled() and not args.no_color
    recorder = RunRecorder(command, config.to_dict(), root=out_dir)
    HANDLERS[command](args, config, recorder, out_dir, colors)
    recorder.write(out_dir / "manifest.json")
    return 0


def resolve_from_args(args: argparse.Namespace) -> PipelineConfig:
    manifest = None
    if args.manifest is not None:
        if not args.manifest.exists():
            raise IoFailure(f"Manifest not found: {args.manifest}", stage="cli", path=str(args.manifest))
        manifest = load_manifest(args.manifest)["config"]
    config = resolve_config(args.config, flag_overrides(args), manifest)
    k = getattr(args, "k", None)
    if k is not None:
        config = config.with_overrides({f"featsel.{K_KEYS[config.get('featsel.method')]}": k})
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        config = resolve_from_args(args)
        return run(args.command, config, args)
    except BrainzError as exc:
        logger.error("%s failed in %s: %s", args.command, exc.stage, exc.message)
        print(json.dumps(exc.to_payload(), sort_keys=True), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
