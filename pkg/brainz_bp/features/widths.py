"""
Pulse, systolic and diastolic widths, overall and at fractional levels.

The x % level of a cycle is hi_min + x * (hi_max - hi_min). Crossings are
searched outward from the peak and located by linear interpolation between the
bracketing samples; SWx runs from the ascending crossing to the peak, DWx from
the peak to the descending crossing and PWx = SWx + DWx.
"""

from typing import Dict, Optional, Sequence

import numpy as np

from ..dataset_io import ProcessedSeries
from ..errors import LevelNotCrossed
from ..fiducial import CycleFiducials
from .base import FeatureGroup, mean_per_feature, require_cycles, time_to_position, usable_cycles

LEVELS = (25, 50, 75, 90)
WIDTH_NAMES = (
    ("DW",) + tuple(f"DW{x}" for x in LEVELS)
    + ("SW",) + tuple(f"SW{x}" for x in LEVELS)
    + ("PW",) + tuple(f"PW{x}" for x in LEVELS)
    + tuple(f"PWR{x}" for x in LEVELS)
)


def ascending_crossing(y: np.ndarray, peak: int, start: int, level: float) -> Optional[float]:
    """Fractional index where ``y`` last rises through ``level`` before ``peak``."""
    before = y[start:peak + 1][::-1]
    hits = np.flatnonzero(before <= level)
    if len(hits) == 0 or hits[0] == 0:
        return None
    a = peak - int(hits[0])
    rise = y[a + 1] - y[a]
    return a + ((level - y[a]) / rise if rise else 0.0)


def descending_crossing(y: np.ndarray, peak: int, stop: int, level: float) -> Optional[float]:
    """Fractional index where ``y`` first falls through ``level`` after ``peak``."""
    after = y[peak:stop + 1]
    hits = np.flatnonzero(after <= level)
    if len(hits) == 0 or hits[0] == 0:
        return None
    b = peak + int(hits[0])
    fall = y[b - 1] - y[b]
    return b - 1 + ((y[b - 1] - level) / fall if fall else 1.0)


def _cycle_widths(c: CycleFiducials, y: np.ndarray, t0: float, fs: float) -> Optional[Dict[str, float]]:
    start = int(np.floor(time_to_position(c.t_min, t0, fs)))
    stop = min(len(y) - 1, int(np.ceil(time_to_position(c.t_min_next, t0, fs))))
    peak = int(round(time_to_position(c.t_max, t0, fs)))
    start = max(0, start)
    span = c.hi_max - c.hi_min
    row = {
        "SW": c.t_max - c.t_min,
        "DW": c.t_min_next - c.t_max,
        "PW": c.t_min_next - c.t_min,
    }
    for x in LEVELS:
        level = c.hi_min + x / 100.0 * span
        up = ascending_crossing(y, peak, start, level)
        down = descending_crossing(y, peak, stop, level)
        if up is None or down is None:
            return None
        sw = c.t_max - (t0 + up / fs)
        dw = (t0 + down / fs) - c.t_max
        row[f"SW{x}"] = sw
        row[f"DW{x}"] = dw
        row[f"PW{x}"] = sw + dw
        row[f"PWR{x}"] = (sw + dw) / row["PW"]
    return row


def width_features(cycles: Sequence[CycleFiducials], biz: ProcessedSeries) -> FeatureGroup:
    kept, excluded = usable_cycles(cycles, needs_next=True)
    require_cycles(kept, "width")
    y = np.asarray(biz.values, dtype=float)
    per_cycle = []
    for c in kept:
        row = _cycle_widths(c, y, biz.t0_s, biz.sample_rate_hz)
        if row is None:
            excluded += 1
            continue
        per_cycle.append(row)
    reasons = {name: LevelNotCrossed.__name__ for name in WIDTH_NAMES}
    return mean_per_feature(WIDTH_NAMES, per_cycle, reasons, excluded)
