import numpy as np
from scipy import stats

from ..errors import ConstantSegment
from .base import FeatureGroup

STAT_NAMES = ("SD", "Skew", "Kurt")


def stat_features(values: np.ndarray) -> FeatureGroup:
    """Sample SD (n-1), skewness m3/m2^1.5 and non-excess kurtosis m4/m2^2 of a whole segment."""
    x = np.asarray(values, dtype=float)
    if len(x) < 3:
        raise ConstantSegment(f"Need at least 3 samples, got {len(x)}")
    sd = float(np.std(x, ddof=1))
    if np.ptp(x) == 0:
        nan = float("nan")
        reason = ConstantSegment.__name__
        return FeatureGroup({"SD": sd, "Skew": nan, "Kurt": nan}, {"Skew": reason, "Kurt": reason})
    return FeatureGroup({
        "SD": sd,
        "Skew": float(stats.skew(x, bias=True)),
        "Kurt": float(stats.kurtosis(x, fisher=False, bias=True)),
    })
