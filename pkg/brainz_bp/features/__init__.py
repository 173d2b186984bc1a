from .base import FeatureGroup
from .differential import diff_features
from .entropy import approximate_entropy, entropy_features, sample_entropy
from .extract import ExtractionParams, SegmentExtraction, check_invariants, extract_all, extract_segment, extract_table
from .heart_rate import heart_rate, hr_features
from .heights import height_features
from .ptt import ptt_features
from .quality import QualityMetrics, signal_quality
from .slopes import slope_features
from .stats import stat_features
from .widths import width_features

__all__ = [
    "FeatureGroup",
    "ExtractionParams",
    "SegmentExtraction",
    "QualityMetrics",
    "ptt_features",
    "width_features",
    "height_features",
    "slope_features",
    "diff_features",
    "stat_features",
    "entropy_features",
    "approximate_entropy",
    "sample_entropy",
    "heart_rate",
    "hr_features",
    "signal_quality",
    "check_invariants",
    "extract_segment",
    "extract_all",
    "extract_table",
]
