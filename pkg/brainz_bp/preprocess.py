"""
Filtering chain and segmentation for the 500 Hz series.

FIR band-pass (zero phase through group-delay compensation), Savitzky-Golay
smoothing or baseline removal with symmetric shrinking edge windows, and
sliding 8 s windows with 75 % overlap.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np
from scipy import signal

from .dataset_io import LabeledSegment, ProcessedSeries
from .errors import InvalidBand, InvalidSpec, LengthMismatch, SeriesShorterThanWindow, SeriesTooShort

logger = logging.getLogger(__name__)


class FirWindow(Enum):
    HAMMING = "hamming"


class FirDesign(Enum):
    LEAST_SQUARES = "least_squares"
    WINDOWED_SINC = "windowed_sinc"


class SgMode(Enum):
    SMOOTH = "smooth"
    DETREND = "detrend"


@dataclass(frozen=True)
class FirSpec:
    order: int = 1000
    low_hz: float = 0.5
    high_hz: float = 10.0
    window: FirWindow = FirWindow.HAMMING
    sample_rate_hz: float = 500.0
    design: FirDesign = FirDesign.LEAST_SQUARES
    low_transition_hz: float = 0.9
    high_transition_hz: float = 2.0
    stop_weight: float = 50.0


@dataclass(frozen=True)
class SgSpec:
    poly_order: int = 3
    window_len: int = 10001


@dataclass(frozen=True)
class WindowSpec:
    window_s: float = 8.0
    overlap_fraction: float = 0.75


# ===== FIR =====

def _validate_fir(spec: FirSpec) -> None:
    nyquist = spec.sample_rate_hz / 2.0
    if spec.order <= 0 or spec.order % 2:
        raise InvalidBand(f"FIR order must be positive and even, got {spec.order}")
    if not 0 < spec.low_hz < spec.high_hz < nyquist:
        raise InvalidBand(f"Need 0 < {spec.low_hz} < {spec.high_hz} < {nyquist}")
    if spec.design is FirDesign.LEAST_SQUARES:
        if spec.low_hz - spec.low_transition_hz / 2 <= 0 or spec.high_hz + spec.high_transition_hz / 2 >= nyquist:
            raise InvalidBand("Transition bands leave the (0, Nyquist) interval")
        if spec.low_hz + spec.low_transition_hz / 2 >= spec.high_hz - spec.high_transition_hz / 2:
            raise InvalidBand("Transition bands overlap the pass band")


def design_fir(spec: FirSpec = FirSpec()) -> np.ndarray:
    """Linear-phase band-pass taps (``order + 1`` of them, symmetric, zero DC gain)."""
    _validate_fir(spec)
    numtaps = spec.order + 1
    fs = spec.sample_rate_hz
    if spec.design is FirDesign.LEAST_SQUARES:
        lo, hi = spec.low_transition_hz / 2, spec.high_transition_hz / 2
        bands = [0.0, spec.low_hz - lo, spec.low_hz + lo, spec.high_hz - hi, spec.high_hz + hi, fs / 2]
        taps = signal.firls(numtaps, bands, [0, 0, 1, 1, 0, 0],
                            weight=[spec.stop_weight, 1.0, spec.stop_weight], fs=fs)
    else:
        taps = signal.firwin(numtaps, [spec.low_hz, spec.high_hz], window=spec.window.value,
                             pass_zero=False, fs=fs)
    # Null the DC gain with a symmetric correction, then make symmetry exact
    weights = np.hamming(numtaps)
    taps = taps - taps.sum() * weights / weights.sum()
    return 0.5 * (taps + taps[::-1])


def frequency_response(taps: np.ndarray, freqs_hz: Sequence[float], fs: float) -> np.ndarray:
    """Complex response of ``taps`` at ``freqs_hz``."""
    _, response = signal.freqz(taps, worN=np.asarray(freqs_hz, dtype=float), fs=fs)
    return response


def magnitude_db(taps: np.ndarray, freqs_hz: Sequence[float], fs: float) -> np.ndarray:
    return 20.0 * np.log10(np.maximum(np.abs(frequency_response(taps, freqs_hz, fs)), 1e-300))


def fir_filter(values: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Zero-phase FIR on a plain array: reflect-pad by the group delay, keep the valid part."""
    taps = np.asarray(taps, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(values) <= len(taps):
        raise SeriesTooShort(f"Series of {len(values)} samples is not longer than {len(taps)} taps",
                             n=len(values), taps=len(taps))
    delay = (len(taps) - 1) // 2
    padded = np.pad(values, delay, mode="reflect")
    return np.convolve(padded, taps, mode="valid")


def apply_fir(series: ProcessedSeries, taps: np.ndarray) -> ProcessedSeries:
    filtered = fir_filter(series.values, taps)
    return series.with_step(filtered, f"fir:taps={len(taps)},edges=reflect")


# ===== Savitzky-Golay =====

def _validate_sg(spec: SgSpec) -> None:
    if spec.window_len < 1 or spec.window_len % 2 == 0:
        raise InvalidSpec(f"SG window length must be odd and positive, got {spec.window_len}")
    if not 0 <= spec.poly_order < spec.window_len:
        raise InvalidSpec(f"SG poly order {spec.poly_order} must lie in [0, {spec.window_len})")


def _edge_smooth(x: np.ndarray, count: int, poly_order: int) -> np.ndarray:
    """SG estimates at i = 0..count-1 from the symmetric window [0, 2i]."""
    if count == 0:
        return np.empty(0)
    i = np.arange(count, dtype=float)
    if poly_order >= 4:
        out = np.empty(count)
        for k in range(count):
            width = 2 * k + 1
            coeffs = signal.savgol_coeffs(width, min(poly_order, width - 1), use="dot")
            out[k] = coeffs @ x[:width]
        return out
    span = x[:2 * count - 1]
    j = np.arange(len(span), dtype=float)
    s0 = np.concatenate([[0.0], np.cumsum(span)])[2 * i.astype(int) + 1]
    if poly_order <= 1:
        return s0 / (2 * i + 1)
    s1 = np.concatenate([[0.0], np.cumsum(j * span)])[2 * i.astype(int) + 1]
    s2_raw = np.concatenate([[0.0], np.cumsum(j * j * span)])[2 * i.astype(int) + 1]
    s2 = s2_raw - 2 * i * s1 + i * i * s0
    # Centre value of a quadratic (= cubic) least-squares fit over 2i+1 points
    denom = (2 * i - 1) * (2 * i + 1) * (2 * i + 3)
    return 3.0 * ((3 * i * i + 3 * i - 1) * s0 - 5.0 * s2) / denom


def savgol_symmetric(values: np.ndarray, window_len: int, poly_order: int) -> np.ndarray:
    """SG smoothing; samples closer than half a window to an edge use the largest symmetric window that fits."""
    x = np.asarray(values, dtype=float)
    n = len(x)
    half = window_len // 2
    out = np.empty(n)
    if n >= window_len:
        coeffs = signal.savgol_coeffs(window_len, poly_order)
        out[half:n - half] = np.convolve(x, coeffs, mode="valid")
        left = right = half
    else:
        left, right = (n + 1) // 2, n // 2
    out[:left] = _edge_smooth(x, left, poly_order)
    if right:
        out[n - right:] = _edge_smooth(x[::-1], right, poly_order)[::-1]
    return out


def apply_sg(series: ProcessedSeries, spec: SgSpec = SgSpec(), mode: SgMode = SgMode.DETREND) -> ProcessedSeries:
    """SMOOTH returns the SG estimate, DETREND the series minus it. Length is preserved."""
    _validate_sg(spec)
    mode = SgMode(mode)
    smooth = savgol_symmetric(series.values, spec.window_len, spec.poly_order)
    values = smooth if mode is SgMode.SMOOTH else series.values - smooth
    return series.with_step(values, f"sg:mode={mode.value},poly={spec.poly_order},window={spec.window_len}")


# ===== Segmentation =====

def window_geometry(n_samples: int, sample_rate_hz: float, spec: WindowSpec) -> Tuple[int, int, int]:
    """(window, hop, count) in samples for a series of ``n_samples``."""
    if spec.window_s <= 0 or not 0 <= spec.overlap_fraction < 1:
        raise InvalidSpec(f"Invalid window spec {spec}")
    window = int(round(spec.window_s * sample_rate_hz))
    hop = max(1, int(round(window * (1.0 - spec.overlap_fraction))))
    if n_samples < window:
        raise SeriesShorterThanWindow(
            f"Series of {n_samples / sample_rate_hz:.3f} s is shorter than the {spec.window_s} s window",
            n_samples=n_samples, window=window,
        )
    return window, hop, (n_samples - window) // hop + 1


def segment(biz: ProcessedSeries, ecg: ProcessedSeries, labels: Tuple[float, float],
            spec: WindowSpec = WindowSpec(), group_id: str = "") -> List[LabeledSegment]:
    """Cut aligned BIOZ and ECG series into overlapping labelled windows."""
    if len(biz) != len(ecg) or biz.sample_rate_hz != ecg.sample_rate_hz or biz.t0_s != ecg.t0_s:
        raise LengthMismatch("BIOZ and ECG series are not aligned", stage="preprocess")
    window, hop, count = window_geometry(len(biz), biz.sample_rate_hz, spec)
    sbp, dbp = labels
    segments = []
    for index in range(count):
        start = index * hop
        step = f"segment:index={index},start={start},window={window}"
        segments.append(LabeledSegment(
            biz=biz.slice(start, start + window, step),
            ecg=ecg.slice(start, start + window, step),
            sbp_mmhg=float(sbp),
            dbp_mmhg=float(dbp),
            segment_index=index,
            group_id=group_id,
        ))
    logger.debug("Cut %d segments of %d samples (hop %d) for %s", count, window, hop, group_id or "<trial>")
    return segments
