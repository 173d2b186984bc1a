from typing import Sequence

from ..errors import ZeroMinHeight
from ..fiducial import CycleFiducials
from .base import FeatureGroup, mean_per_feature, require_cycles, usable_cycles

HEIGHT_NAMES = ("HI_max", "HI_min", "HI_MD", "PP", "HIR_max", "HIR_MD")


def height_features(cycles: Sequence[CycleFiducials]) -> FeatureGroup:
    """Heights at the fiducial points, pulse pressure proxy and ratios to the minimum."""
    kept, excluded = usable_cycles(cycles, needs_next=False)
    require_cycles(kept, "height")
    per_cycle = []
    for c in kept:
        row = {"HI_max": c.hi_max, "HI_min": c.hi_min, "HI_MD": c.hi_md, "PP": c.hi_max - c.hi_min}
        if c.hi_min != 0:
            row["HIR_max"] = c.hi_max / c.hi_min
            row["HIR_MD"] = c.hi_md / c.hi_min
        per_cycle.append(row)
    reasons = {"HIR_max": ZeroMinHeight.__name__, "HIR_MD": ZeroMinHeight.__name__}
    return mean_per_feature(HEIGHT_NAMES, per_cycle, reasons, excluded)
