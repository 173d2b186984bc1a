"""
Configuration settings for the BrainZ-BP pipeline.

Defaults live in per-stage dictionaries and can be overridden from the
environment (``BRAINZ_*`` variables, optionally from a ``.env`` file), from a
versioned key-value config file, and finally from command-line flags.
"""

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from .errors import InvalidConfigFile

# Load environment variables from .env file if it exists
try:
    from dotenv import dotenv_values, load_dotenv
    load_dotenv()
except ImportError:
    # dotenv not installed, config files cannot be read but env defaults still work
    dotenv_values = None

logger = logging.getLogger(__name__)

MANIFEST_VERSION = "1"

# Acquisition constants of the measurement front end
ACQUISITION_CONFIG = {
    "sample_rate_hz": float(os.getenv("BRAINZ_SAMPLE_RATE_HZ", "100000")),
    "excitation_freq_hz": float(os.getenv("BRAINZ_EXCITATION_FREQ_HZ", "10000")),
    "r0_ohm": float(os.getenv("BRAINZ_R0_OHM", "10000")),
}

# Demodulation
DEMOD_CONFIG = {
    "n_block": int(os.getenv("BRAINZ_N_BLOCK", "200")),
    # 0 takes the excitation frequency from each recording's header
    "excitation_freq_hz": float(os.getenv("BRAINZ_DEMOD_EXCITATION_HZ", "0")),
    # impedance series written by the demod command; the ECG is always kept
    "kinds": ("abs", "real", "imag"),
}

# Filtering chain and segmentation
PREPROCESS_CONFIG = {
    "fir_order": int(os.getenv("BRAINZ_FIR_ORDER", "1000")),
    "fir_low_hz": float(os.getenv("BRAINZ_FIR_LOW_HZ", "0.5")),
    "fir_high_hz": float(os.getenv("BRAINZ_FIR_HIGH_HZ", "10")),
    "fir_window": os.getenv("BRAINZ_FIR_WINDOW", "hamming"),
    "fir_design": os.getenv("BRAINZ_FIR_DESIGN", "least_squares"),
    "fir_transition_low_hz": float(os.getenv("BRAINZ_FIR_TRANSITION_LOW_HZ", "0.9")),
    "fir_transition_high_hz": float(os.getenv("BRAINZ_FIR_TRANSITION_HIGH_HZ", "2.0")),
    "fir_stop_weight": float(os.getenv("BRAINZ_FIR_STOP_WEIGHT", "50")),
    "sg_poly_order": int(os.getenv("BRAINZ_SG_POLY_ORDER", "3")),
    "sg_window_len": int(os.getenv("BRAINZ_SG_WINDOW_LEN", "10001")),
    "sg_mode_biz": os.getenv("BRAINZ_SG_MODE_BIZ", "detrend"),
    "sg_mode_ecg": os.getenv("BRAINZ_SG_MODE_ECG", "detrend"),
    "window_s": float(os.getenv("BRAINZ_WINDOW_S", "8")),
    "overlap_fraction": float(os.getenv("BRAINZ_OVERLAP_FRACTION", "0.75")),
}

# R-peak and BIOZ fiducial detection
FIDUCIAL_CONFIG = {
    "qrs_low_hz": float(os.getenv("BRAINZ_QRS_LOW_HZ", "5")),
    "qrs_high_hz": float(os.getenv("BRAINZ_QRS_HIGH_HZ", "15")),
    "integration_window_s": float(os.getenv("BRAINZ_INTEGRATION_WINDOW_S", "0.15")),
    "refractory_s": float(os.getenv("BRAINZ_REFRACTORY_S", "0.25")),
    "learning_period_s": float(os.getenv("BRAINZ_LEARNING_PERIOD_S", "2.0")),
    "min_search_fraction": float(os.getenv("BRAINZ_MIN_SEARCH_FRACTION", "0.5")),
}

# Feature extraction
FEATURE_CONFIG = {
    "entropy_m": int(os.getenv("BRAINZ_ENTROPY_M", "2")),
    "entropy_r_frac": float(os.getenv("BRAINZ_ENTROPY_R_FRAC", "0.2")),
}

# Feature ranking and top-K selection
FEATSEL_CONFIG = {
    "method": os.getenv("BRAINZ_FEATSEL_METHOD", "rf_impurity"),
    "k": int(os.getenv("BRAINZ_FEATSEL_K", "10")),
    "pcc_k": int(os.getenv("BRAINZ_FEATSEL_PCC_K", "20")),
    "combined_k": int(os.getenv("BRAINZ_FEATSEL_COMBINED_K", "25")),
    "k_grid": (1, 2, 3, 5, 8, 10, 15, 20, 25, 30, 35, 42),
}

# Regressors; 0 means "resolve automatically" for max_depth, mtry and svr_gamma
MODEL_CONFIG = {
    "kind": os.getenv("BRAINZ_MODEL_KIND", "rf"),
    "n_trees": int(os.getenv("BRAINZ_N_TREES", "500")),
    "min_samples_leaf": int(os.getenv("BRAINZ_MIN_SAMPLES_LEAF", "1")),
    "max_depth": int(os.getenv("BRAINZ_MAX_DEPTH", "0")),
    "mtry": int(os.getenv("BRAINZ_MTRY", "0")),
    "bootstrap": os.getenv("BRAINZ_BOOTSTRAP", "true").lower() == "true",
    "svr_c": float(os.getenv("BRAINZ_SVR_C", "1000")),
    "svr_epsilon": float(os.getenv("BRAINZ_SVR_EPSILON", "0.1")),
    "svr_gamma": float(os.getenv("BRAINZ_SVR_GAMMA", "0")),
    "svr_tol": float(os.getenv("BRAINZ_SVR_TOL", "1e-3")),
    "svr_max_passes": int(os.getenv("BRAINZ_SVR_MAX_PASSES", "200")),
    "n_trees_grid": (10, 50, 100, 200, 500, 1000),
}

# Cross-validation and grading
EVAL_CONFIG = {
    "n_folds": int(os.getenv("BRAINZ_N_FOLDS", "10")),
    "split_unit": os.getenv("BRAINZ_SPLIT_UNIT", "segment"),
    "aami_me_limit": float(os.getenv("BRAINZ_AAMI_ME_LIMIT", "5")),
    "aami_sd_limit": float(os.getenv("BRAINZ_AAMI_SD_LIMIT", "8")),
    "cp_thresholds": (5.0, 10.0, 15.0),
    "histogram_bin_mmhg": float(os.getenv("BRAINZ_HISTOGRAM_BIN_MMHG", "2")),
    "compare_kinds": ("lr", "svr", "dt", "rf"),
}

# BHS grade thresholds: grade -> minimum (cp5, cp10, cp15)
BHS_GRADES = {
    "A": (60.0, 85.0, 95.0),
    "B": (50.0, 75.0, 90.0),
    "C": (40.0, 65.0, 85.0),
}

# Synthetic cohort generation
SYNTH_CONFIG = {
    "n_subjects": int(os.getenv("BRAINZ_SYNTH_SUBJECTS", "13")),
    "n_trials": int(os.getenv("BRAINZ_SYNTH_TRIALS", "10")),
    "duration_s": float(os.getenv("BRAINZ_SYNTH_DURATION_S", "30")),
    "noise_snr_db": float(os.getenv("BRAINZ_SYNTH_SNR_DB", "40")),
    # true generates without noise; noise_snr_db is then ignored
    "noise_free": os.getenv("BRAINZ_SYNTH_NOISE_FREE", "false").lower() == "true",
    "hr_min_bpm": float(os.getenv("BRAINZ_SYNTH_HR_MIN", "60")),
    "hr_max_bpm": float(os.getenv("BRAINZ_SYNTH_HR_MAX", "100")),
    "ptt_min_s": float(os.getenv("BRAINZ_SYNTH_PTT_MIN", "0.08")),
    "ptt_max_s": float(os.getenv("BRAINZ_SYNTH_PTT_MAX", "0.20")),
}

# Dataset adapters
DATASET_CONFIG = {
    "public_columns": {"vs": "VS", "vr": "VR", "ecg": "ECG"},
}

# Runtime
RUNTIME_CONFIG = {
    "seed": int(os.getenv("BRAINZ_SEED", "0")),
    "threads": int(os.getenv("BRAINZ_THREADS", "0")),
    "format": os.getenv("BRAINZ_FORMAT", "csv"),
    "target": os.getenv("BRAINZ_TARGET", "both"),
}

# UI Configuration
UI_CONFIG = {
    "colors_enabled": os.getenv("BRAINZ_COLORS", "true").lower() == "true",
}


# Environment Variables
def get_env_config() -> Dict[str, Any]:
    """Get configuration from environment variables."""
    return {
        "log_level": os.getenv("LOG_LEVEL", "INFO").upper(),
    }


# Sections that take part in the resolved, serializable pipeline config
_SECTIONS = {
    "acquisition": ACQUISITION_CONFIG,
    "demod": DEMOD_CONFIG,
    "preprocess": PREPROCESS_CONFIG,
    "fiducial": FIDUCIAL_CONFIG,
    "features": FEATURE_CONFIG,
    "featsel": FEATSEL_CONFIG,
    "model": MODEL_CONFIG,
    "eval": EVAL_CONFIG,
    "synth": SYNTH_CONFIG,
    "runtime": RUNTIME_CONFIG,
}


# Allowed values of the enumerated keys; tuple keys are checked item by item
CHOICES = {
    "demod.kinds": ("abs", "real", "imag"),
    "preprocess.fir_window": ("hamming",),
    "preprocess.fir_design": ("least_squares", "windowed_sinc"),
    "preprocess.sg_mode_biz": ("smooth", "detrend"),
    "preprocess.sg_mode_ecg": ("smooth", "detrend"),
    "featsel.method": ("pcc", "rf_impurity", "combined"),
    "model.kind": ("lr", "dt", "rf", "svr"),
    "eval.split_unit": ("segment", "trial", "subject"),
    "eval.compare_kinds": ("lr", "dt", "rf", "svr"),
    "runtime.format": ("csv", "bin"),
    "runtime.target": ("sbp", "dbp", "both"),
}

# Keys that must be strictly positive
POSITIVE = (
    "demod.n_block",
    "preprocess.fir_order",
    "preprocess.sg_window_len",
    "preprocess.window_s",
    "model.n_trees",
    "synth.n_subjects",
    "synth.n_trials",
    "synth.duration_s",
)


def colors_enabled() -> bool:
    """Check if colored terminal output is enabled."""
    return UI_CONFIG["colors_enabled"]


def _coerce(default: Any, value: Any, key: str) -> Any:
    """Coerce ``value`` to the type of ``default``."""
    try:
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return text in ("true", "1", "yes")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            items = value.split(",") if isinstance(value, str) else list(value)
            kind = type(default[0]) if default else str
            return tuple(kind(str(item).strip()) if kind is not str else str(item).strip() for item in items)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise InvalidConfigFile(f"Cannot read {key}={value!r} as {type(default).__name__}", key=key) from exc


@dataclass
class PipelineConfig:
    """Fully resolved, serializable configuration of one run."""

    sections: Dict[str, Dict[str, Any]] = field(
        default_factory=lambda: {name: dict(values) for name, values in _SECTIONS.items()}
    )
    manifest_version: str = MANIFEST_VERSION

    def section(self, name: str) -> Dict[str, Any]:
        return self.sections[name]

    def get(self, dotted_key: str) -> Any:
        section, key = _split_key(dotted_key)
        return self.sections[section][key]

    @property
    def seed(self) -> int:
        return self.sections["runtime"]["seed"]

    @property
    def threads(self) -> int:
        threads = self.sections["runtime"]["threads"]
        return threads if threads > 0 else (os.cpu_count() or 1)

    def with_overrides(self, overrides: Mapping[str, Any]) -> "PipelineConfig":
        """Return a copy with ``section.key`` overrides applied."""
        sections = {name: dict(values) for name, values in self.sections.items()}
        for dotted_key, value in overrides.items():
            if value is None:
                continue
            section, key = _split_key(dotted_key)
            if section not in sections or key not in sections[section]:
                raise InvalidConfigFile(f"Unknown config key: {dotted_key}", key=dotted_key)
            sections[section][key] = _coerce(sections[section][key], value, dotted_key)
        return PipelineConfig(sections=sections, manifest_version=self.manifest_version).validated()

    def validated(self) -> "PipelineConfig":
        """Check enumerated and size keys; raise InvalidConfigFile on the first bad one."""
        for dotted_key, allowed in CHOICES.items():
            value = self.get(dotted_key)
            items = value if isinstance(value, tuple) else (value,)
            bad = [item for item in items if item not in allowed]
            if bad or not items:
                raise InvalidConfigFile(
                    f"Invalid value {value!r} for {dotted_key}; expected one of {', '.join(allowed)}",
                    key=dotted_key,
                )
        for dotted_key in POSITIVE:
            if not self.get(dotted_key) > 0:
                raise InvalidConfigFile(f"{dotted_key} must be positive, got {self.get(dotted_key)!r}",
                                        key=dotted_key)
        overlap = self.get("preprocess.overlap_fraction")
        if not 0 <= overlap < 1:
            raise InvalidConfigFile(f"preprocess.overlap_fraction must lie in [0, 1), got {overlap!r}",
                                    key="preprocess.overlap_fraction")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "manifest_version": self.manifest_version,
            "sections": {
                name: {key: list(value) if isinstance(value, tuple) else value for key, value in values.items()}
                for name, values in self.sections.items()
            },
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PipelineConfig":
        version = str(data.get("manifest_version", ""))
        if version != MANIFEST_VERSION:
            raise InvalidConfigFile(f"Unsupported manifest version {version!r}", version=version)
        overrides = {
            f"{name}.{key}": value
            for name, values in data.get("sections", {}).items()
            for key, value in values.items()
        }
        return cls().with_overrides(overrides)


def _split_key(dotted_key: str):
    if "." not in dotted_key:
        raise InvalidConfigFile(f"Config keys must look like section.key, got {dotted_key!r}", key=dotted_key)
    section, key = dotted_key.split(".", 1)
    return section, key


def load_config_file(path: Path) -> Dict[str, str]:
    """Read a versioned key-value config file into ``section.key`` overrides."""
    if dotenv_values is None:
        raise InvalidConfigFile("python-dotenv is required to read config files")
    path = Path(path)
    if not path.exists():
        raise InvalidConfigFile(f"Config file not found: {path}", path=str(path))
    values = dict(dotenv_values(path))
    version = values.pop("manifest_version", None)
    if version != MANIFEST_VERSION:
        raise InvalidConfigFile(
            f"Config file {path} declares manifest_version={version!r}, expected {MANIFEST_VERSION}",
            path=str(path),
        )
    return {key: value for key, value in values.items() if value is not None}


def resolve_config(
    config_file: Optional[Path] = None,
    flag_overrides: Optional[Mapping[str, Any]] = None,
    manifest: Optional[Mapping[str, Any]] = None,
) -> PipelineConfig:
    """Resolve defaults <- manifest or config file <- flags, and log the result."""
    config = PipelineConfig.from_dict(manifest) if manifest is not None else PipelineConfig()
    if config_file is not None:
        config = config.with_overrides(load_config_file(config_file))
    if flag_overrides:
        config = config.with_overrides(flag_overrides)
    config.validated()
    for name, values in config.sections.items():
        logger.info("Resolved config [%s]: %s", name, ", ".join(f"{k}={v}" for k, v in values.items()))
    return config
