"""
Synthetic raw recordings with exact ground truth.

The impedance waveform is a train of piecewise raised-cosine pulses (fast
systolic rise, slower diastolic decay) on a baseline with respiratory
modulation. The sense-resistor voltage is obtained by inverting the
measurement relation Z = (V_S/V_R - 1) * R0 with Z held constant over each
demodulation block, so noise-free demodulation returns the synthesized
impedance exactly. The ECG is a train of narrow gaussian R spikes over small
P and T bumps. All of it is synthetic and makes no claim about physiology.
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from .dataset_io import RawRecording
from .errors import InvalidConfig

logger = logging.getLogger(__name__)


class SnrReference(Enum):
    """What the carrier-channel SNR is measured against."""
    MODULATION = "modulation"  # envelope fluctuation carried by the impedance
    CARRIER = "carrier"  # full excitation carrier


@dataclass(frozen=True)
class BpLaw:
    """BP = a - b*PTT + c*HR + N(0, sigma^2)."""
    a: float
    b: float
    c: float
    sigma: float = 0.0


@dataclass(frozen=True)
class SynthConfig:
    heart_rate_bpm: float = 72.0
    z_baseline_ohm: float = 500.0
    delta_z_ohm: float = 32.0
    ptt_s: float = 0.12
    systolic_fraction: float = 0.3
    respiration_amp_ohm: float = 2.0
    respiration_freq_hz: float = 0.25
    noise_snr_db: Optional[float] = None
    bp_law: BpLaw = field(default_factory=lambda: BpLaw(150.0, 100.0, 0.2, 2.0))
    dbp_law: BpLaw = field(default_factory=lambda: BpLaw(95.0, 60.0, 0.1, 1.5))
    seed: int = 0
    sample_rate_hz: float = 100_000.0
    excitation_freq_hz: float = 10_000.0
    excitation_amp_v: float = 0.5
    r0_ohm: float = 10_000.0
    n_block: int = 200
    impedance_phase_rad: float = 0.0
    snr_reference: SnrReference = SnrReference.MODULATION
    first_r_s: float = 0.25
    ecg_amp_v: float = 1.0
    ecg_carrier_leak_v: float = 0.0

    @property
    def rr_s(self) -> float:
        return 60.0 / self.heart_rate_bpm

    @property
    def systolic_s(self) -> float:
        return self.systolic_fraction * self.rr_s


@dataclass(frozen=True, eq=False)
class GroundTruth:
    r_peak_times_s: np.ndarray
    biz_min_times_s: np.ndarray
    biz_max_times_s: np.ndarray
    biz_md_times_s: np.ndarray
    true_sbp_mmhg: np.ndarray
    true_dbp_mmhg: np.ndarray
    clean_impedance: np.ndarray
    block_times_s: np.ndarray
    heart_rate_bpm: float
    ptt_s: float

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready sidecar content."""
        out = {}
        for key, value in asdict(self).items():
            out[key] = value.tolist() if isinstance(value, np.ndarray) else value
        return out


def validate_config(config: SynthConfig) -> None:
    """Raise ``InvalidConfig`` for configurations the generator cannot honour."""
    problems = []
    if not 30.0 <= config.heart_rate_bpm <= 220.0:
        problems.append(f"heart_rate_bpm={config.heart_rate_bpm} outside [30, 220]")
    if config.delta_z_ohm < 0:
        problems.append("delta_z_ohm must be >= 0")
    if not 0.0 < config.systolic_fraction < 1.0:
        problems.append("systolic_fraction must lie in (0, 1)")
    if config.ptt_s < 0 or config.ptt_s >= 0.5 * config.rr_s:
        problems.append(f"ptt_s={config.ptt_s} must lie in [0, RR/2)")
    if config.ptt_s + config.systolic_s >= config.rr_s:
        problems.append("BIOZ peak would fall after the next R peak")
    if config.z_baseline_ohm - abs(config.respiration_amp_ohm) < 0:
        problems.append("impedance would turn negative")
    if config.sample_rate_hz / config.excitation_freq_hz < 4:
        problems.append("excitation not resolvable at the sample rate")
    if config.n_block < 1 or config.r0_ohm <= 0 or config.excitation_amp_v <= 0:
        problems.append("n_block, r0_ohm and excitation_amp_v must be positive")
    if problems:
        raise InvalidConfig("; ".join(problems))


def pulse_waveform(t: np.ndarray, config: SynthConfig) -> np.ndarray:
    """Pulsatile impedance component (0 at each minimum, delta_z at each peak)."""
    rr = config.rr_s
    ts = config.systolic_s
    td = rr - ts
    tau = np.mod(np.asarray(t, dtype=float) - (config.first_r_s + config.ptt_s), rr)
    rise = 0.5 * (1.0 - np.cos(np.pi * tau / ts))
    decay = 0.5 * (1.0 + np.cos(np.pi * (tau - ts) / td))
    return config.delta_z_ohm * np.where(tau <= ts, rise, decay)


def impedance_magnitude(t: np.ndarray, config: SynthConfig) -> np.ndarray:
    respiration = config.respiration_amp_ohm * np.sin(2.0 * np.pi * config.respiration_freq_hz * np.asarray(t))
    return config.z_baseline_ohm + pulse_waveform(t, config) + respiration


def ecg_waveform(t: np.ndarray, r_times: np.ndarray, config: SynthConfig) -> np.ndarray:
    """Gaussian R spikes over small P and T bumps."""
    t = np.asarray(t, dtype=float)
    fs = config.sample_rate_hz
    ecg = np.zeros_like(t)
    rr = config.rr_s
    # (offset in RR units, amplitude, width in seconds)
    waves = ((-0.2, 0.12, 0.025), (0.0, 1.0, 0.010), (0.35, 0.25, 0.040))
    for t_r in r_times:
        for offset, amplitude, sigma in waves:
            centre = t_r + offset * rr
            lo = max(0, int((centre - 6 * sigma) * fs))
            hi = min(len(t), int((centre + 6 * sigma) * fs) + 1)
            if lo >= hi:
                continue
            seg = t[lo:hi]
            ecg[lo:hi] += config.ecg_amp_v * amplitude * np.exp(-0.5 * ((seg - centre) / sigma) ** 2)
    return ecg


def modulate_carrier(z_blocks: np.ndarray, n_samples: int, config: SynthConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Excitation and sense-resistor voltages for block-constant complex impedance."""
    n = config.n_block
    t = np.arange(n_samples) / config.sample_rate_hz
    phase = 2.0 * np.pi * config.excitation_freq_hz * t
    vs = config.excitation_amp_v * np.sin(phase)
    gain = config.r0_ohm / (config.r0_ohm + np.asarray(z_blocks, dtype=complex))
    per_sample = gain[np.arange(n_samples) // n]
    vr = config.excitation_amp_v * np.abs(per_sample) * np.sin(phase + np.angle(per_sample))
    return vs, vr


def block_centre_times(n_blocks: int, config: SynthConfig) -> np.ndarray:
    """Centre time of each demodulation block (the 500 Hz sample times)."""
    return (np.arange(n_blocks) * config.n_block + (config.n_block - 1) / 2.0) / config.sample_rate_hz


def bp_labels(config: SynthConfig, ptt_s: Sequence[float], hr_bpm: Sequence[float],
              rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """SBP/DBP pairs from the configured affine laws plus seeded gaussian noise."""
    ptt = np.asarray(ptt_s, dtype=float)
    hr = np.asarray(hr_bpm, dtype=float)
    if ptt.shape != hr.shape:
        raise InvalidConfig("ptt_s and hr_bpm must have the same length")
    if np.any(ptt <= 0) or np.any(hr <= 0):
        raise InvalidConfig("PTT and HR must be positive")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    sbp_noise = rng.standard_normal(ptt.shape)
    dbp_noise = rng.standard_normal(ptt.shape)
    s, d = config.bp_law, config.dbp_law
    sbp = s.a - s.b * ptt + s.c * hr + s.sigma * sbp_noise
    dbp = d.a - d.b * ptt + d.c * hr + d.sigma * dbp_noise
    return np.column_stack([sbp, dbp])


def generate(config: SynthConfig, duration_s: float, subject_id: str = "SYN",
             trial_id: str = "T01") -> Tuple[RawRecording, GroundTruth]:
    """Synthesize one trial's raw recording and its ground truth."""
    validate_config(config)
    beats = duration_s * config.heart_rate_bpm / 60.0
    if beats < 2:
        raise InvalidConfig(f"duration_s={duration_s} holds fewer than two beats")
    if beats < 10:
        logger.warning("Synthetic trial holds only %.1f beats; at least 10 are recommended", beats)

    rng = np.random.default_rng(config.seed)
    fs = config.sample_rate_hz
    n_samples = int(round(duration_s * fs))
    n_blocks_total = -(-n_samples // config.n_block)
    centres = block_centre_times(n_blocks_total, config)
    z_mag = impedance_magnitude(centres, config)
    z_blocks = z_mag * np.exp(1j * config.impedance_phase_rad)
    vs, vr = modulate_carrier(z_blocks, n_samples, config)

    rr = config.rr_s
    r_times = config.first_r_s + rr * np.arange(int(np.floor((duration_s - config.first_r_s) / rr)) + 1)
    r_times = r_times[r_times < duration_s]
    t = np.arange(n_samples) / fs
    ecg = ecg_waveform(t, r_times, config)
    if config.ecg_carrier_leak_v:
        ecg = ecg + config.ecg_carrier_leak_v * np.sin(2.0 * np.pi * config.excitation_freq_hz * t)

    if config.noise_snr_db is not None:
        scale = 10.0 ** (-config.noise_snr_db / 20.0)
        if config.snr_reference is SnrReference.MODULATION:
            envelope = config.excitation_amp_v * np.abs(config.r0_ohm / (config.r0_ohm + z_blocks))
            carrier_rms = float(np.std(envelope))
        else:
            carrier_rms = config.excitation_amp_v / np.sqrt(2.0)
        ecg_rms = float(np.sqrt(np.mean(ecg ** 2)))
        vs = vs + carrier_rms * scale * rng.standard_normal(n_samples)
        vr = vr + carrier_rms * scale * rng.standard_normal(n_samples)
        ecg = ecg + ecg_rms * scale * rng.standard_normal(n_samples)

    ts = config.systolic_s
    mins = r_times + config.ptt_s
    keep = mins + ts < duration_s
    labels = bp_labels(config, [config.ptt_s], [config.heart_rate_bpm], rng=np.random.default_rng([config.seed, 1]))

    n_blocks = n_samples // config.n_block
    truth = GroundTruth(
        r_peak_times_s=r_times,
        biz_min_times_s=mins[keep],
        biz_max_times_s=(mins + ts)[keep],
        biz_md_times_s=(mins + ts / 2.0)[keep],
        true_sbp_mmhg=labels[:, 0],
        true_dbp_mmhg=labels[:, 1],
        clean_impedance=z_mag[:n_blocks],
        block_times_s=centres[:n_blocks],
        heart_rate_bpm=config.heart_rate_bpm,
        ptt_s=config.ptt_s,
    )
    recording = RawRecording(
        vs_samples=vs,
        vr_samples=vr,
        ecg_samples=ecg,
        sample_rate_hz=fs,
        excitation_freq_hz=config.excitation_freq_hz,
        r0_ohm=config.r0_ohm,
        subject_id=subject_id,
        trial_id=trial_id,
    )
    logger.debug("Generated %s/%s: %d samples, %d beats", subject_id, trial_id, n_samples, len(r_times))
    return recording, truth


@dataclass(frozen=True)
class CohortTrial:
    subject_id: str
    trial_id: str
    config: SynthConfig


def plan_cohort(config: SynthConfig, n_subjects: int, n_trials: int,
                hr_range: Tuple[float, float] = (60.0, 100.0),
                ptt_range: Tuple[float, float] = (0.08, 0.20),
                z_baseline_range: Tuple[float, float] = (400.0, 600.0),
                delta_z_range: Tuple[float, float] = (20.0, 40.0)) -> Iterator[CohortTrial]:
    """Per-trial configs of a synthetic cohort, derived from ``config.seed``.

    Each subject draws its own baseline and pulsatile amplitude; each trial
    draws its own heart rate and PTT, so labels vary across trials through the
    configured BP law.
    """
    subjects = np.random.SeedSequence(config.seed).spawn(n_subjects)
    for s, subject_seq in enumerate(subjects):
        subject_rng = np.random.default_rng(subject_seq)
        z_base = subject_rng.uniform(*z_baseline_range)
        delta_z = subject_rng.uniform(*delta_z_range)
        for t, trial_seq in enumerate(subject_seq.spawn(n_trials)):
            trial_rng = np.random.default_rng(trial_seq)
            trial_config = replace(
                config,
                z_baseline_ohm=float(z_base),
                delta_z_ohm=float(delta_z),
                heart_rate_bpm=float(trial_rng.uniform(*hr_range)),
                ptt_s=float(trial_rng.uniform(*ptt_range)),
                seed=int(trial_seq.generate_state(1)[0]),
            )
            yield CohortTrial(f"S{s + 1:02d}", f"T{t + 1:02d}", trial_config)


def generate_cohort(config: SynthConfig, n_subjects: int, n_trials: int, duration_s: float,
                    **ranges: Tuple[float, float]) -> Iterator[Tuple[RawRecording, GroundTruth]]:
    """Generate every trial of a synthetic cohort in a deterministic order."""
    for trial in plan_cohort(config, n_subjects, n_trials, **ranges):
        yield generate(trial.config, duration_s, trial.subject_id, trial.trial_id)
