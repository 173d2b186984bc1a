"""
Carrier demodulation: raw 100 kHz recordings to the 500 Hz impedance series.

Each block of ``n_block`` samples is fitted with a three-parameter sine model
``c + a*sin(wt) + b*cos(wt)`` for both the excitation voltage V_S and the sense
resistor voltage V_R. The impedance follows from the amplitude ratio and phase
difference as Z = (A_S/A_R * exp(j(phi_S - phi_R)) - 1) * R0. The ECG channel
is reduced to one block mean per block.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .dataset_io import ProcessedSeries, RawRecording, SeriesKind
from .errors import AliasedExcitation, BlockTooShort, DegenerateBlock

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BlockEstimate:
    a_s: float
    phi_s: float
    a_r: float
    phi_r: float
    block_index: int = 0


@dataclass(frozen=True)
class ComplexImpedance:
    real_ohm: float
    imag_ohm: float
    abs_ohm: float

    @classmethod
    def from_complex(cls, z: complex) -> "ComplexImpedance":
        return cls(float(z.real), float(z.imag), float(np.hypot(z.real, z.imag)))


def _check_rates(f_exc: float, fs: float, n: int) -> None:
    if not 0 < f_exc < fs / 2:
        raise AliasedExcitation(f"Excitation {f_exc} Hz is not below Nyquist ({fs / 2} Hz)", f_exc=f_exc, fs=fs)
    if fs / f_exc < 4:
        raise AliasedExcitation(f"Fewer than 4 samples per excitation period ({fs / f_exc:.2f})", f_exc=f_exc, fs=fs)
    if n < 4 or n * f_exc / fs < 1:
        raise BlockTooShort(f"Block of {n} samples holds less than one excitation period", n_block=n)


def _sine_basis(n: int, f_exc: float, fs: float) -> np.ndarray:
    """Columns sin(wt), cos(wt), 1 over one block."""
    t = np.arange(n) / fs
    w = 2.0 * np.pi * f_exc
    return np.column_stack([np.sin(w * t), np.cos(w * t), np.ones(n)])


def _fit_blocks(blocks: np.ndarray, f_exc: float, fs: float) -> Tuple[np.ndarray, np.ndarray]:
    """Least-squares amplitude and phase of every row of ``blocks``."""
    basis = _sine_basis(blocks.shape[1], f_exc, fs)
    if np.linalg.matrix_rank(basis) < 3:
        raise AliasedExcitation("Sine and cosine are not separable at this rate", f_exc=f_exc, fs=fs)
    coeffs = blocks @ np.linalg.pinv(basis).T
    a, b = coeffs[:, 0], coeffs[:, 1]
    amplitude = np.hypot(a, b)
    phase = np.arctan2(b, a)
    phase[phase <= -np.pi] = np.pi
    return amplitude, phase


def estimate_block(vs_block: np.ndarray, vr_block: np.ndarray, f_exc: float, fs: float,
                   block_index: int = 0) -> BlockEstimate:
    """Fit amplitude and phase of one V_S / V_R block pair."""
    vs_block = np.asarray(vs_block, dtype=float)
    vr_block = np.asarray(vr_block, dtype=float)
    if vs_block.shape != vr_block.shape or vs_block.ndim != 1:
        raise BlockTooShort("V_S and V_R blocks must be 1-D and of equal length")
    _check_rates(f_exc, fs, len(vs_block))
    for name, block in (("vs", vs_block), ("vr", vr_block)):
        if np.ptp(block) == 0:
            raise DegenerateBlock(f"{name} block {block_index} has zero variance", block_index=block_index, channel=name)
    amplitude, phase = _fit_blocks(np.vstack([vs_block, vr_block]), f_exc, fs)
    for name, a in zip(("vs", "vr"), amplitude):
        if a <= 0:
            raise DegenerateBlock(f"{name} block {block_index} has no excitation component", block_index=block_index)
    return BlockEstimate(float(amplitude[0]), float(phase[0]), float(amplitude[1]), float(phase[1]), block_index)


def _impedance(a_s, phi_s, a_r, phi_r, r0: float):
    return (a_s / a_r * np.exp(1j * (phi_s - phi_r)) - 1.0) * r0


def impedance_from_block(b: BlockEstimate, r0: float) -> ComplexImpedance:
    """Impedance of one block from its amplitude ratio and phase difference."""
    if b.a_r <= 0 or r0 <= 0:
        raise DegenerateBlock("a_r and r0 must be positive", block_index=b.block_index)
    return ComplexImpedance.from_complex(complex(_impedance(b.a_s, b.phi_s, b.a_r, b.phi_r, r0)))


def demodulate(rec: RawRecording, n_block: int = 200,
               excitation_freq_hz: Optional[float] = None
               ) -> Tuple[ProcessedSeries, ProcessedSeries, ProcessedSeries, ProcessedSeries]:
    """Return |Z|, Re Z, Im Z and the block-averaged ECG at ``fs / n_block``.

    Sample k of each output sits at the centre of block k, which sets ``t0_s``.
    A trailing partial block is dropped.
    """
    fs = rec.sample_rate_hz
    f_exc = excitation_freq_hz or rec.excitation_freq_hz
    _check_rates(f_exc, fs, n_block)
    n_blocks, remainder = divmod(rec.n_samples, n_block)
    if n_blocks == 0:
        raise BlockTooShort(f"Recording of {rec.n_samples} samples is shorter than one block", n_block=n_block)
    if remainder:
        logger.warning("Dropping trailing partial block of %d samples (%s/%s)", remainder, rec.subject_id, rec.trial_id)

    usable = n_blocks * n_block
    vs = rec.vs_samples[:usable].reshape(n_blocks, n_block)
    vr = rec.vr_samples[:usable].reshape(n_blocks, n_block)
    for name, blocks in (("vs", vs), ("vr", vr)):
        flat = np.flatnonzero(np.ptp(blocks, axis=1) == 0)
        if len(flat):
            raise DegenerateBlock(f"{name} block {flat[0]} has zero variance", block_index=int(flat[0]), channel=name)

    a_s, phi_s = _fit_blocks(vs, f_exc, fs)
    a_r, phi_r = _fit_blocks(vr, f_exc, fs)
    dead = np.flatnonzero((a_s <= 0) | (a_r <= 0))
    if len(dead):
        raise DegenerateBlock(f"Block {dead[0]} has no excitation component", block_index=int(dead[0]))
    z = _impedance(a_s, phi_s, a_r, phi_r, rec.r0_ohm)
    ecg = rec.ecg_samples[:usable].reshape(n_blocks, n_block).mean(axis=1)

    out_rate = fs / n_block
    t0 = (n_block - 1) / (2.0 * fs)
    step = f"demod:n_block={n_block},f_exc={f_exc:g},estimator=least_squares"
    logger.debug("Demodulated %d blocks to %g Hz", n_blocks, out_rate)

    def series(values: np.ndarray, kind: SeriesKind, entry: str = step) -> ProcessedSeries:
        return ProcessedSeries(values, out_rate, kind, (entry,), t0)

    return (
        series(np.hypot(z.real, z.imag), SeriesKind.BIOZ_ABS),
        series(z.real, SeriesKind.BIOZ_REAL),
        series(z.imag, SeriesKind.BIOZ_IMAG),
        series(ecg, SeriesKind.ECG, f"demod:n_block={n_block},reduction=block_mean"),
    )
