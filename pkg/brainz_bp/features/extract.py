"""
Assembly of the 42-feature vector of one labelled segment.

Fiducial detection runs first; every group then contributes its values in
canonical order. A group that cannot be computed, or a feature flagged by its
group, marks the vector invalid with the reason codes collected along the way.
"""

import logging
from dataclasses import dataclass
from typing import Any, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from ..dataset_io import FEATURE_NAMES, FeatureTable, FeatureVector, LabeledSegment
from ..errors import BrainzError
from ..fiducial import CycleFiducials, detect_cycle_fiducials, detect_r_peaks
from .base import FeatureGroup
from .differential import diff_features
from .entropy import entropy_features
from .heart_rate import hr_features
from .heights import height_features
from .ptt import ptt_features
from .slopes import slope_features
from .stats import stat_features
from .widths import LEVELS, width_features

logger = logging.getLogger(__name__)

INVARIANT_VIOLATION = "InvariantViolation"


@dataclass(frozen=True)
class ExtractionParams:
    entropy_m: int = 2
    entropy_r_frac: float = 0.2
    qrs_low_hz: float = 5.0
    qrs_high_hz: float = 15.0
    integration_window_s: float = 0.15
    refractory_s: float = 0.25
    learning_period_s: float = 2.0
    min_search_fraction: float = 0.5

    @classmethod
    def from_sections(cls, sections: Mapping[str, Mapping[str, Any]]) -> "ExtractionParams":
        fid, feat = sections["fiducial"], sections["features"]
        return cls(
            entropy_m=int(feat["entropy_m"]),
            entropy_r_frac=float(feat["entropy_r_frac"]),
            qrs_low_hz=float(fid["qrs_low_hz"]),
            qrs_high_hz=float(fid["qrs_high_hz"]),
            integration_window_s=float(fid["integration_window_s"]),
            refractory_s=float(fid["refractory_s"]),
            learning_period_s=float(fid["learning_period_s"]),
            min_search_fraction=float(fid["min_search_fraction"]),
        )


@dataclass(frozen=True, eq=False)
class SegmentExtraction:
    vector: FeatureVector
    r_times: np.ndarray
    cycles: Tuple[CycleFiducials, ...]
    n_excluded: int


def check_invariants(values: Mapping[str, float], tol: float = 1e-9) -> List[str]:
    """Names of the structural identities a feature vector breaks."""
    broken = []

    def close(a: float, b: float) -> bool:
        return abs(a - b) <= tol * max(1.0, abs(a), abs(b))

    if not close(values["PW"], values["SW"] + values["DW"]):
        broken.append("PW=SW+DW")
    if not close(values["PP"], values["HI_max"] - values["HI_min"]):
        broken.append("PP=HI_max-HI_min")
    ratios = [values[f"PWR{x}"] for x in LEVELS]
    if not all(0 < r <= 1 + tol for r in ratios) or any(a < b - tol for a, b in zip(ratios, ratios[1:])):
        broken.append("PWR")
    return broken


def _invalid(segment: LabeledSegment, reasons: Sequence[str]) -> FeatureVector:
    return FeatureVector(np.full(len(FEATURE_NAMES), np.nan), segment.sbp_mmhg, segment.dbp_mmhg, False,
                         tuple(dict.fromkeys(reasons)), segment.group_id, segment.segment_index)


def extract_segment(segment: LabeledSegment, params: Optional[ExtractionParams] = None) -> SegmentExtraction:
    params = params or ExtractionParams()
    empty = np.empty(0)
    try:
        r_times = detect_r_peaks(segment.ecg, params.qrs_low_hz, params.qrs_high_hz,
                                 params.integration_window_s, params.refractory_s, params.learning_period_s)
        cycles = detect_cycle_fiducials(segment.biz, r_times, params.min_search_fraction)
        groups: List[FeatureGroup] = [
            ptt_features(cycles),
            width_features(cycles, segment.biz),
            height_features(cycles),
            slope_features(cycles),
            diff_features(cycles, segment.biz),
            stat_features(segment.biz.values),
            entropy_features(segment.biz.values, params.entropy_m, params.entropy_r_frac),
            hr_features(r_times),
        ]
    except BrainzError as exc:
        logger.debug("Segment %s#%d invalid: %s", segment.group_id, segment.segment_index, exc.code)
        return SegmentExtraction(_invalid(segment, [exc.code]), empty, (), 0)

    merged = {}
    reasons: List[str] = []
    for group in groups:
        merged.update(group.values)
        reasons.extend(group.flags.values())
    values = np.array([merged[name] for name in FEATURE_NAMES], dtype=float)
    if not reasons and np.all(np.isfinite(values)):
        broken = check_invariants(merged)
        if broken:
            logger.warning("Segment %s#%d breaks %s", segment.group_id, segment.segment_index, broken)
            reasons.append(INVARIANT_VIOLATION)
    if not np.all(np.isfinite(values)) and not reasons:
        reasons.append("NonFiniteFeature")
    n_excluded = max(g.n_excluded for g in groups)
    vector = FeatureVector(values, segment.sbp_mmhg, segment.dbp_mmhg, not reasons,
                           tuple(dict.fromkeys(reasons)), segment.group_id, segment.segment_index, n_excluded)
    return SegmentExtraction(vector, r_times, tuple(cycles), n_excluded)


def extract_all(segment: LabeledSegment, params: Optional[ExtractionParams] = None) -> FeatureVector:
    """The canonical 42-feature vector of ``segment``."""
    return extract_segment(segment, params).vector


def extract_table(segments: Sequence[LabeledSegment], params: Optional[ExtractionParams] = None,
                  threads: int = 1) -> FeatureTable:
    """Feature table of many segments, in input order."""
    vectors = Parallel(n_jobs=threads)(delayed(extract_all)(s, params) for s in segments)
    table = FeatureTable.from_vectors(vectors)
    invalid = int((~table.valid).sum()) if len(table) else 0
    if invalid:
        logger.warning("%d of %d segments produced invalid feature vectors", invalid, len(table))
    return table
