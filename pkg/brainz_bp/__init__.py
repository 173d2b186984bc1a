"""
BrainZ-BP: cuff-less blood pressure estimation from brain bio-impedance.

Pipeline stages: demodulation of the excitation carrier to impedance,
FIR / Savitzky-Golay preprocessing, R-peak and BIOZ fiducial detection,
42-feature extraction, feature ranking, regression and cross-validated
evaluation against the AAMI and BHS standards. A synthetic generator provides
ground truth for every stage.
"""

__version__ = "1.0.0"

from .dataset_io import (
    FEATURE_NAMES,
    FeatureTable,
    FeatureVector,
    LabeledSegment,
    ProcessedSeries,
    RawRecording,
    SeriesKind,
)

__all__ = [
    "__version__",
    "FEATURE_NAMES",
    "FeatureTable",
    "FeatureVector",
    "LabeledSegment",
    "ProcessedSeries",
    "RawRecording",
    "SeriesKind",
]
