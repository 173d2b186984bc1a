from typing import Sequence

from ..errors import ZeroDuration
from ..fiducial import CycleFiducials
from .base import FeatureGroup, mean_per_feature, require_cycles, usable_cycles

SLOPE_NAMES = ("AS", "DS")


def slope_features(cycles: Sequence[CycleFiducials]) -> FeatureGroup:
    """Ascending slope (min to max) and descending slope (max to next min, negative)."""
    kept, excluded = usable_cycles(cycles, needs_next=True)
    require_cycles(kept, "slope")
    per_cycle = []
    for c in kept:
        row = {}
        if c.t_max != c.t_min:
            row["AS"] = (c.hi_max - c.hi_min) / (c.t_max - c.t_min)
        if c.t_max != c.t_min_next:
            row["DS"] = (c.hi_max - c.hi_min_next) / (c.t_max - c.t_min_next)
        per_cycle.append(row)
    return mean_per_feature(SLOPE_NAMES, per_cycle, dict.fromkeys(SLOPE_NAMES, ZeroDuration.__name__), excluded)
