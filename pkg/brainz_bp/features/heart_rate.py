from typing import Sequence

import numpy as np

from ..errors import TooFewPeaks
from .base import FeatureGroup


def heart_rate(r_times: Sequence[float]) -> float:
    """60 / mean R-R interval, in bpm."""
    r_times = np.asarray(r_times, dtype=float)
    if len(r_times) < 2:
        raise TooFewPeaks(f"Heart rate needs two R peaks, got {len(r_times)}")
    return float(60.0 / np.mean(np.diff(r_times)))


def hr_features(r_times: Sequence[float]) -> FeatureGroup:
    return FeatureGroup({"HR": heart_rate(r_times)})
