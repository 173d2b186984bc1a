"""Measurement-quality indicators: per-cycle impedance excursion and regularity."""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..dataset_io import ProcessedSeries
from ..errors import NoValidCycles
from ..fiducial import CycleFiducials
from .base import time_to_position, usable_cycles
from .entropy import sample_entropy


@dataclass(frozen=True)
class QualityMetrics:
    delta_z_mean: float
    delta_z_sd: float
    sampen_mean: float
    sampen_sd: float
    n_cycles: int


def _mean_sd(values: Sequence[float]):
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return float("nan"), float("nan")
    sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return float(np.mean(values)), sd


def signal_quality(biz: ProcessedSeries, cycles: Sequence[CycleFiducials], m: int = 2,
                   r_frac: float = 0.2) -> QualityMetrics:
    """Mean and SD over valid cycles of the peak-to-trough excursion and of the per-cycle SampEn."""
    kept, _ = usable_cycles(cycles, needs_next=True)
    if not kept:
        raise NoValidCycles("No valid cycles to assess signal quality")
    y = np.asarray(biz.values, dtype=float)
    fs, t0 = biz.sample_rate_hz, biz.t0_s
    excursions = [c.hi_max - c.hi_min for c in kept]
    entropies = []
    for c in kept:
        start = max(0, int(round(time_to_position(c.t_min, t0, fs))))
        stop = min(len(y), int(round(time_to_position(c.t_min_next, t0, fs))) + 1)
        cycle = y[start:stop]
        if len(cycle) > m + 2 and np.ptp(cycle) > 0:
            value = sample_entropy(cycle, m, r_frac * float(np.std(cycle, ddof=1)))
            if np.isfinite(value):
                entropies.append(value)
    dz_mean, dz_sd = _mean_sd(excursions)
    se_mean, se_sd = _mean_sd(entropies)
    return QualityMetrics(dz_mean, dz_sd, se_mean, se_sd, len(kept))
