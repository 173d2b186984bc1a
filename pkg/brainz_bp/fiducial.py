"""
R-peak detection on the ECG and per-cycle BIOZ fiducial points.

R peaks come from a Pan-Tompkins style detector (5-15 Hz band-pass, derivative,
squaring, 150 ms moving integration, adaptive thresholds with search-back).
Each R-R interval then yields the BIOZ minimum, maximum and maximum-derivative
points, refined below the sample period by parabolic interpolation.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import signal

from .dataset_io import ProcessedSeries
from .errors import EmptyCycleWindow, NoPeaksFound, TooFewPeaks

logger = logging.getLogger(__name__)

# Cycle flag vocabulary
ORDERING_VIOLATION = "OrderingViolation"
HEIGHT_ORDERING = "HeightOrdering"
DEGENERATE_DERIVATIVE = "DegenerateDerivative"
NO_NEXT_MINIMUM = "NoNextMinimum"
EMPTY_CYCLE_WINDOW = "EmptyCycleWindow"


@dataclass(frozen=True)
class CycleFiducials:
    t_r: float
    t_min: float
    t_max: float
    t_md: float
    t_min_next: float
    hi_max: float
    hi_min: float
    hi_md: float
    hi_min_next: float = float("nan")
    flags: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def valid(self) -> bool:
        return not self.flags

    def shifted(self, dt: float) -> "CycleFiducials":
        return replace(self, t_r=self.t_r + dt, t_min=self.t_min + dt, t_max=self.t_max + dt,
                       t_md=self.t_md + dt, t_min_next=self.t_min_next + dt)


def parabolic_offset(y_prev: float, y0: float, y_next: float) -> float:
    """Vertex offset (in samples, within +-0.5) of the parabola through three points."""
    denom = y_prev - 2.0 * y0 + y_next
    if denom == 0 or not np.isfinite(denom):
        return 0.0
    return float(np.clip(0.5 * (y_prev - y_next) / denom, -0.5, 0.5))


def _refine(y: np.ndarray, k: int, lo: int, hi: int, maximum: bool) -> float:
    """Sub-sample position of the extremum at ``k`` when it is a strict interior extremum of ``y[lo:hi+1]``."""
    if k <= lo or k >= hi:
        return float(k)
    a, b, c = y[k - 1], y[k], y[k + 1]
    is_peak = b >= a and b >= c if maximum else b <= a and b <= c
    return k + parabolic_offset(a, b, c) if is_peak else float(k)


def _interp(y: np.ndarray, position: float) -> float:
    return float(np.interp(position, np.arange(len(y)), y))


# ===== R peaks =====

def _integrated_energy(x: np.ndarray, fs: float, low_hz: float, high_hz: float, window_s: float) -> np.ndarray:
    sos = signal.butter(2, [low_hz, high_hz], btype="bandpass", fs=fs, output="sos")
    band = signal.sosfiltfilt(sos, x)
    slope = np.gradient(band) * fs
    width = max(1, int(round(window_s * fs)))
    return np.convolve(slope ** 2, np.ones(width) / width, mode="same")


def detect_r_peaks(ecg: ProcessedSeries, low_hz: float = 5.0, high_hz: float = 15.0,
                   integration_window_s: float = 0.15, refractory_s: float = 0.25,
                   learning_period_s: float = 2.0) -> np.ndarray:
    """R-peak times in seconds (strictly increasing, at least ``refractory_s`` apart)."""
    x = np.asarray(ecg.values, dtype=float)
    fs = ecg.sample_rate_hz
    if len(x) < 2 * fs:
        raise NoPeaksFound(f"ECG of {len(x) / fs:.2f} s is shorter than 2 s")
    if np.ptp(x) == 0:
        raise NoPeaksFound("ECG is flat")

    energy = _integrated_energy(x, fs, low_hz, high_hz, integration_window_s)
    refractory = int(round(refractory_s * fs))
    candidates, _ = signal.find_peaks(energy, distance=refractory)
    if len(candidates) == 0 or energy.max() <= 0:
        raise NoPeaksFound("Detection function has no peaks")

    learning = energy[: int(learning_period_s * fs)]
    spki = 0.5 * float(learning.max())
    npki = 0.5 * float(learning.mean())
    accepted: List[int] = []
    pending: List[int] = []  # noise peaks since the last accepted beat

    def accept(idx: int, weight: float) -> None:
        nonlocal spki
        accepted.append(idx)
        pending.clear()
        spki = weight * energy[idx] + (1 - weight) * spki

    for idx in candidates:
        threshold = npki + 0.25 * (spki - npki)
        if len(accepted) >= 2:
            rr_mean = float(np.mean(np.diff(accepted[-9:])))
            if idx - accepted[-1] > 1.66 * rr_mean:
                missed = [p for p in pending if p - accepted[-1] >= refractory and energy[p] > 0.5 * threshold]
                if missed:
                    accept(max(missed, key=lambda p: energy[p]), 0.25)
        if energy[idx] > threshold and (not accepted or idx - accepted[-1] >= refractory):
            accept(idx, 0.125)
        else:
            pending.append(idx)
            npki = 0.125 * energy[idx] + 0.875 * npki

    if not accepted:
        raise NoPeaksFound("No candidate crossed the adaptive threshold")

    # Refine to the ECG maximum near each detection
    half = int(round(0.1 * fs))
    positions: List[float] = []
    for idx in accepted:
        lo, hi = max(0, idx - half), min(len(x) - 1, idx + half)
        k = lo + int(np.argmax(x[lo:hi + 1]))
        pos = _refine(x, k, 0, len(x) - 1, maximum=True)
        if positions and pos - positions[-1] < refractory:
            if x[k] > _interp(x, positions[-1]):
                positions[-1] = pos
            continue
        positions.append(pos)
    times = ecg.t0_s + np.asarray(positions) / fs
    logger.debug("Detected %d R peaks over %.1f s", len(times), len(x) / fs)
    return times


# ===== BIOZ cycles =====

def _window(t0: float, fs: float, n: int, start_s: float, stop_s: float) -> Tuple[int, int]:
    """Inclusive sample range covering [start_s, stop_s], clipped to the series."""
    lo = int(np.ceil((start_s - t0) * fs - 1e-9))
    hi = int(np.floor((stop_s - t0) * fs + 1e-9))
    return max(lo, 0), min(hi, n - 1)


def detect_cycle_fiducials(biz: ProcessedSeries, r_times: Sequence[float],
                           min_search_fraction: float = 0.5) -> List[CycleFiducials]:
    """One :class:`CycleFiducials` per R-R interval; cycles breaking the ordering are flagged."""
    r_times = np.asarray(r_times, dtype=float)
    if len(r_times) < 2:
        raise TooFewPeaks(f"Need at least two R peaks, got {len(r_times)}", stage="fiducial")
    y = np.asarray(biz.values, dtype=float)
    fs, t0, n = biz.sample_rate_hz, biz.t0_s, len(y)

    def at(position: float) -> float:
        return t0 + position / fs

    cycles: List[CycleFiducials] = []
    for j in range(len(r_times) - 1):
        t_r, t_next = r_times[j], r_times[j + 1]
        rr = t_next - t_r
        lo, hi = _window(t0, fs, n, t_r, t_r + min_search_fraction * rr)
        end = _window(t0, fs, n, t_r, t_next)[1]
        if hi < lo or end <= lo:
            nan = float("nan")
            cycles.append(CycleFiducials(t_r, nan, nan, nan, nan, nan, nan, nan, nan, (EMPTY_CYCLE_WINDOW,)))
            continue
        flags: List[str] = []

        k_min = lo + int(np.argmin(y[lo:hi + 1]))
        p_min = _refine(y, k_min, lo, hi, maximum=False)
        k_max = k_min + int(np.argmax(y[k_min:end + 1]))
        p_max = _refine(y, k_max, k_min, end, maximum=True)

        if k_max - k_min >= 1:
            d = np.diff(y[k_min:k_max + 1]) * fs
            if np.ptp(d) <= 1e-12 * max(1.0, float(np.max(np.abs(d)))):
                flags.append(DEGENERATE_DERIVATIVE)
            j_md = int(np.argmax(d))
            p_md = k_min + 0.5 + _refine(d, j_md, 0, len(d) - 1, maximum=True)
        else:
            flags.append(DEGENERATE_DERIVATIVE)
            p_md = float(k_min)

        rr_next = r_times[j + 2] - t_next if j + 2 < len(r_times) else rr
        lo_n = int(np.ceil((t_next - t0) * fs - 1e-9))
        hi_n = int(np.floor((t_next + min_search_fraction * rr_next - t0) * fs + 1e-9))
        if lo_n < 0 or hi_n > n - 1 or hi_n < lo_n:
            flags.append(NO_NEXT_MINIMUM)
            p_next, hi_min_next = float("nan"), float("nan")
        else:
            k_next = lo_n + int(np.argmin(y[lo_n:hi_n + 1]))
            p_next = _refine(y, k_next, lo_n, hi_n, maximum=False)
            hi_min_next = _interp(y, p_next)

        cycle = CycleFiducials(
            t_r=float(t_r),
            t_min=at(p_min),
            t_max=at(p_max),
            t_md=at(p_md),
            t_min_next=at(p_next),
            hi_max=_interp(y, p_max),
            hi_min=_interp(y, p_min),
            hi_md=_interp(y, p_md),
            hi_min_next=hi_min_next,
        )
        if not (cycle.t_r - 0.5 / fs <= cycle.t_min < cycle.t_md < cycle.t_max
                and (np.isnan(cycle.t_min_next) or cycle.t_max < cycle.t_min_next)):
            flags.append(ORDERING_VIOLATION)
        if not cycle.hi_min <= cycle.hi_md <= cycle.hi_max:
            flags.append(HEIGHT_ORDERING)
        cycles.append(replace(cycle, flags=tuple(dict.fromkeys(flags))))

    if all(EMPTY_CYCLE_WINDOW in c.flags for c in cycles):
        raise EmptyCycleWindow("No R-R interval overlaps the BIOZ series")
    flagged = sum(1 for c in cycles if not c.valid)
    if flagged:
        logger.debug("%d of %d cycles flagged", flagged, len(cycles))
    return cycles


def fiducials_to_frame(cycles: Sequence[CycleFiducials], segment_index: Optional[int] = None) -> pd.DataFrame:
    """Per-cycle fiducial table for plotting and inspection."""
    rows = []
    for i, c in enumerate(cycles):
        row = {
            "cycle": i,
            "t_r": c.t_r, "t_min": c.t_min, "t_md": c.t_md, "t_max": c.t_max, "t_min_next": c.t_min_next,
            "hi_min": c.hi_min, "hi_md": c.hi_md, "hi_max": c.hi_max, "hi_min_next": c.hi_min_next,
            "valid": c.valid, "flags": ";".join(c.flags),
        }
        if segment_index is not None:
            row = {"segment_index": segment_index, **row}
        rows.append(row)
    return pd.DataFrame(rows)
