"""
Features of the first-order difference of BIOZ (Ohm/s) over each cycle.

The difference lobe around its maximum is bounded on each side by the nearest
zero crossing or local minimum of the difference series, whichever comes
first; without either, the cycle bound is used. PWd is the lobe width, PWd50
the width at half the lobe height (lobe bounds when the half level is not
crossed inside the lobe), PWRd = PWd50 / PWd, and ASd / DSd are the slopes from
the lobe bounds up to the maximum.
"""

from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..dataset_io import ProcessedSeries
from ..errors import DegenerateDifference
from ..fiducial import CycleFiducials
from .base import FeatureGroup, mean_per_feature, require_cycles, time_to_position, usable_cycles
from .widths import ascending_crossing, descending_crossing

DIFF_NAMES = ("HId_max", "PWd", "PWd50", "PWRd", "ASd", "DSd")


def lobe_bound(d: np.ndarray, peak: int, direction: int) -> Tuple[float, float]:
    """(fractional index, value) of the lobe bound walking from ``peak`` in ``direction``."""
    last = 0 if direction < 0 else len(d) - 1
    i = peak
    while i != last:
        j = i + direction
        if d[j] <= 0:
            # zero crossing between i and j
            frac = d[i] / (d[i] - d[j]) if d[i] != d[j] else 0.0
            return i + direction * frac, 0.0
        if j != last and d[j + direction] > d[j]:
            return float(j), float(d[j])
        i = j
    return float(last), float(d[last])


def _cycle_diff(c: CycleFiducials, y: np.ndarray, t0: float, fs: float) -> Optional[Dict[str, float]]:
    start = max(0, int(round(time_to_position(c.t_min, t0, fs))))
    stop = min(len(y) - 1, int(round(time_to_position(c.t_min_next, t0, fs))))
    if stop - start + 1 < 3:
        return None
    d = np.diff(y[start:stop + 1]) * fs
    peak = int(np.argmax(d))
    height = float(d[peak])

    def at(position: float) -> float:
        # difference sample k sits halfway between BIOZ samples start+k and start+k+1
        return t0 + (start + 0.5 + position) / fs

    left, d_left = lobe_bound(d, peak, -1)
    right, d_right = lobe_bound(d, peak, +1)
    row = {"HId_max": height, "PWd": (right - left) / fs}

    half = 0.5 * height
    up = ascending_crossing(d, peak, int(np.floor(left)), half)
    down = descending_crossing(d, peak, int(np.ceil(right)), half)
    up = left if up is None or up < left else up
    down = right if down is None or down > right else down
    row["PWd50"] = (down - up) / fs
    if row["PWd"] > 0:
        row["PWRd"] = row["PWd50"] / row["PWd"]

    t_peak = at(peak)
    if at(left) != t_peak and height != d_left:
        row["ASd"] = (height - d_left) / (t_peak - at(left))
    if at(right) != t_peak and height != d_right:
        row["DSd"] = (height - d_right) / (t_peak - at(right))
    return row


def diff_features(cycles: Sequence[CycleFiducials], biz: ProcessedSeries) -> FeatureGroup:
    kept, excluded = usable_cycles(cycles, needs_next=True)
    require_cycles(kept, "difference")
    y = np.asarray(biz.values, dtype=float)
    per_cycle = []
    for c in kept:
        row = _cycle_diff(c, y, biz.t0_s, biz.sample_rate_hz)
        if row is None:
            excluded += 1
            continue
        per_cycle.append(row)
    return mean_per_feature(DIFF_NAMES, per_cycle, dict.fromkeys(DIFF_NAMES, DegenerateDifference.__name__), excluded)
