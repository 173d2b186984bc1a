"""
Stage chaining shared by the CLI commands.

A trial flows through demodulation, the FIR band-pass, Savitzky-Golay
detrending, segmentation and feature extraction inside one worker, so only
feature vectors travel back to the parent process. Synthetic trials are also
generated inside their worker.
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .config import PipelineConfig
from .dataset_io import FeatureTable, FeatureVector, ProcessedSeries, RawFormat, RawRecording, load_raw, load_series
from .demod import demodulate
from .errors import InvalidLabels, MissingHeaderField
from .features import ExtractionParams, extract_all
from .preprocess import (FirDesign, FirSpec, FirWindow, SgMode, SgSpec, WindowSpec, apply_fir, apply_sg, design_fir,
                         segment)
from .synthgen import CohortTrial, SynthConfig, generate, plan_cohort

logger = logging.getLogger(__name__)

Labels = Mapping[Tuple[str, str], Tuple[float, float]]


@dataclass(frozen=True)
class StageSettings:
    """Signal-path parameters resolved from a :class:`PipelineConfig`."""

    n_block: int = 200
    # None takes the excitation frequency from the recording header
    excitation_freq_hz: Optional[float] = None
    kinds: Tuple[str, ...] = ("abs", "real", "imag")
    fir: FirSpec = FirSpec()
    sg: SgSpec = SgSpec()
    sg_mode_biz: SgMode = SgMode.DETREND
    sg_mode_ecg: SgMode = SgMode.DETREND
    window: WindowSpec = WindowSpec()
    extraction: ExtractionParams = ExtractionParams()

    @classmethod
    def from_config(cls, config: PipelineConfig) -> "StageSettings":
        pre = config.section("preprocess")
        n_block = int(config.get("demod.n_block"))
        excitation = float(config.get("demod.excitation_freq_hz"))
        return cls(
            n_block=n_block,
            excitation_freq_hz=excitation if excitation > 0 else None,
            kinds=tuple(config.get("demod.kinds")),
            fir=FirSpec(
                order=int(pre["fir_order"]),
                low_hz=float(pre["fir_low_hz"]),
                high_hz=float(pre["fir_high_hz"]),
                window=FirWindow(pre["fir_window"]),
                sample_rate_hz=float(config.get("acquisition.sample_rate_hz")) / n_block,
                design=FirDesign(pre["fir_design"]),
                low_transition_hz=float(pre["fir_transition_low_hz"]),
                high_transition_hz=float(pre["fir_transition_high_hz"]),
                stop_weight=float(pre["fir_stop_weight"]),
            ),
            sg=SgSpec(int(pre["sg_poly_order"]), int(pre["sg_window_len"])),
            sg_mode_biz=SgMode(pre["sg_mode_biz"]),
            sg_mode_ecg=SgMode(pre["sg_mode_ecg"]),
            window=WindowSpec(float(pre["window_s"]), float(pre["overlap_fraction"])),
            extraction=ExtractionParams.from_sections(config.sections),
        )


def demodulated(rec: RawRecording, settings: StageSettings) -> Dict[str, ProcessedSeries]:
    abs_z, real_z, imag_z, ecg = demodulate(rec, settings.n_block, settings.excitation_freq_hz)
    return {"biz_abs": abs_z, "biz_real": real_z, "biz_imag": imag_z, "ecg": ecg}


def filtered(series: Mapping[str, ProcessedSeries], settings: StageSettings,
             taps: Optional[np.ndarray] = None) -> Tuple[ProcessedSeries, ProcessedSeries]:
    """FIR band-pass then SG on the |Z| and ECG series."""
    missing = [name for name in ("biz_abs", "ecg") if name not in series]
    if missing:
        raise MissingHeaderField(f"Series bundle lacks {', '.join(missing)}", stage="dataset-io",
                                 field=missing[0])
    if taps is None:
        fir = settings.fir
        if series["biz_abs"].sample_rate_hz != fir.sample_rate_hz:
            fir = replace(fir, sample_rate_hz=series["biz_abs"].sample_rate_hz)
        taps = design_fir(fir)
    biz = apply_sg(apply_fir(series["biz_abs"], taps), settings.sg, settings.sg_mode_biz)
    ecg = apply_sg(apply_fir(series["ecg"], taps), settings.sg, settings.sg_mode_ecg)
    return biz, ecg


def series_vectors(biz: ProcessedSeries, ecg: ProcessedSeries, labels: Tuple[float, float], group_id: str,
                   settings: StageSettings) -> List[FeatureVector]:
    """Segment filtered BIOZ/ECG series and extract every window."""
    segments = segment(biz, ecg, labels, settings.window, group_id)
    return [extract_all(s, settings.extraction) for s in segments]


def trial_vectors(rec: RawRecording, labels: Tuple[float, float], settings: StageSettings) -> List[FeatureVector]:
    """Feature vectors of every segment of one trial."""
    biz, ecg = filtered(demodulated(rec, settings), settings)
    return series_vectors(biz, ecg, labels, f"{rec.subject_id}/{rec.trial_id}", settings)


def _synthetic_trial_vectors(trial: CohortTrial, duration_s: float,
                             settings: StageSettings) -> List[FeatureVector]:
    rec, truth = generate(trial.config, duration_s, trial.subject_id, trial.trial_id)
    return trial_vectors(rec, (float(truth.true_sbp_mmhg[0]), float(truth.true_dbp_mmhg[0])), settings)


def _label_for(key: Tuple[str, str], labels: Labels) -> Tuple[float, float]:
    if key not in labels:
        raise InvalidLabels(f"No reference label for trial {key[0]}/{key[1]}", stage="dataset-io",
                            subject_id=key[0], trial_id=key[1])
    return labels[key]


def _file_trial_vectors(path: Path, fmt: RawFormat, labels: Labels, settings: StageSettings) -> List[FeatureVector]:
    rec = load_raw(path, fmt)
    return trial_vectors(rec, _label_for((rec.subject_id, rec.trial_id), labels), settings)


def _table(per_trial: Sequence[List[FeatureVector]], provenance: Dict[str, Any]) -> FeatureTable:
    table = FeatureTable.from_vectors([v for vectors in per_trial for v in vectors])
    table.provenance.update(provenance)
    invalid = int((~table.valid).sum()) if len(table) else 0
    if invalid:
        logger.warning("%d of %d segments produced invalid feature vectors", invalid, len(table))
    return table


def synth_config(config: PipelineConfig) -> SynthConfig:
    acquisition = config.section("acquisition")
    noise_free = bool(config.get("synth.noise_free"))
    return SynthConfig(
        seed=config.seed,
        noise_snr_db=None if noise_free else float(config.get("synth.noise_snr_db")),
        sample_rate_hz=float(acquisition["sample_rate_hz"]),
        excitation_freq_hz=float(acquisition["excitation_freq_hz"]),
        r0_ohm=float(acquisition["r0_ohm"]),
        n_block=int(config.get("demod.n_block")),
    )


def cohort_plan(config: PipelineConfig) -> List[CohortTrial]:
    synth = config.section("synth")
    return list(plan_cohort(
        synth_config(config), int(synth["n_subjects"]), int(synth["n_trials"]),
        hr_range=(float(synth["hr_min_bpm"]), float(synth["hr_max_bpm"])),
        ptt_range=(float(synth["ptt_min_s"]), float(synth["ptt_max_s"])),
    ))


def synthetic_feature_table(config: PipelineConfig, threads: Optional[int] = None) -> FeatureTable:
    """Generate the configured synthetic cohort and extract its feature table."""
    settings = StageSettings.from_config(config)
    plan = cohort_plan(config)
    duration = float(config.get("synth.duration_s"))
    logger.info("--- Stage: synth+extract (%d trials of %.1f s) ---", len(plan), duration)
    per_trial = Parallel(n_jobs=threads or config.threads)(
        delayed(_synthetic_trial_vectors)(trial, duration, settings) for trial in plan
    )
    return _table(per_trial, {"source": "synthetic", "seed": config.seed})


def feature_table_from_files(paths: Sequence[Path], labels: Labels, config: PipelineConfig,
                             fmt: RawFormat = RawFormat.CSV, threads: Optional[int] = None) -> FeatureTable:
    """Run the signal path over raw recordings on disk."""
    settings = StageSettings.from_config(config)
    logger.info("--- Stage: extract (%d raw trials) ---", len(paths))
    per_trial = Parallel(n_jobs=threads or config.threads)(
        delayed(_file_trial_vectors)(Path(p), fmt, labels, settings) for p in sorted(paths)
    )
    return _table(per_trial, {"source": "raw", "n_trials": len(paths)})


def trial_stem(subject_id: str, trial_id: str) -> str:
    return f"{subject_id}__{trial_id}"


def trial_key(path: Path) -> Tuple[str, str]:
    """(subject_id, trial_id) encoded in a series-bundle file name."""
    stem = Path(path).stem
    if "__" not in stem:
        raise InvalidLabels(f"Cannot read subject and trial from {Path(path).name}", stage="dataset-io",
                            path=str(path))
    subject_id, trial_id = stem.split("__", 1)
    return subject_id, trial_id


def _bundle_vectors(path: Path, labels: Labels, settings: StageSettings) -> List[FeatureVector]:
    key = trial_key(path)
    label = _label_for(key, labels)
    bundle = load_series(path)
    return series_vectors(bundle["biz"], bundle["ecg"], label, f"{key[0]}/{key[1]}", settings)


def feature_table_from_series(paths: Sequence[Path], labels: Labels, config: PipelineConfig,
                              threads: Optional[int] = None) -> FeatureTable:
    """Segment and extract preprocessed series bundles (``biz`` and ``ecg`` columns)."""
    settings = StageSettings.from_config(config)
    logger.info("--- Stage: extract (%d preprocessed trials) ---", len(paths))
    per_trial = Parallel(n_jobs=threads or config.threads)(
        delayed(_bundle_vectors)(Path(p), labels, settings) for p in sorted(paths)
    )
    return _table(per_trial, {"source": "series", "n_trials": len(paths)})
