"""Transit-time features: R peak to BIOZ maximum, minimum and maximum-derivative point."""

from typing import Sequence

from ..fiducial import CycleFiducials
from .base import FeatureGroup, mean_per_feature, require_cycles, usable_cycles

PTT_NAMES = ("PTT_max", "PTT_min", "PAT")


def ptt_features(cycles: Sequence[CycleFiducials]) -> FeatureGroup:
    kept, excluded = usable_cycles(cycles, needs_next=False)
    require_cycles(kept, "PTT")
    per_cycle = [
        {"PTT_max": c.t_max - c.t_r, "PTT_min": c.t_min - c.t_r, "PAT": c.t_md - c.t_r}
        for c in kept
    ]
    return mean_per_feature(PTT_NAMES, per_cycle, {}, excluded)
