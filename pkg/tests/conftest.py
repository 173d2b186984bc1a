import numpy as np
import pytest

from brainz_bp.dataset_io import FEATURE_NAMES, FeatureTable, ProcessedSeries, SeriesKind
from brainz_bp.demod import demodulate
from brainz_bp.fiducial import CycleFiducials
from brainz_bp.synthgen import SynthConfig, generate

FS_OUT = 500.0


def make_series(values, fs: float = FS_OUT, kind: SeriesKind = SeriesKind.BIOZ_ABS, t0: float = 0.0) -> ProcessedSeries:
    return ProcessedSeries(np.asarray(values, dtype=float), fs, kind, (), t0)


def make_table(X, sbp, groups=None, names=None) -> FeatureTable:
    """All-valid feature table; DBP is SBP - 40."""
    X = np.asarray(X, dtype=float)
    sbp = np.asarray(sbp, dtype=float)
    n = len(sbp)
    groups = groups if groups is not None else [f"S{i % 13 + 1:02d}/T01" for i in range(n)]
    names = names or tuple(f"f{i}" for i in range(X.shape[1]))
    return FeatureTable(X, sbp, sbp - 40.0, groups, np.ones(n, dtype=bool), [""] * n, np.arange(n),
                        tuple(names))


@pytest.fixture(scope="session")
def clean_config() -> SynthConfig:
    """Noise-free, respiration-free trial at 72 bpm."""
    return SynthConfig(heart_rate_bpm=72.0, respiration_amp_ohm=0.0, noise_snr_db=None, seed=3)


@pytest.fixture(scope="session")
def clean_trial(clean_config):
    return generate(clean_config, 10.0, "S01", "T01")


@pytest.fixture(scope="session")
def clean_series(clean_trial):
    rec, _ = clean_trial
    return demodulate(rec, 200)


@pytest.fixture
def triangle():
    """Triangle pulse: 0 at t=0, 1 at t=0.2, back to 0 at t=0.8, sampled at 500 Hz."""
    t = np.arange(401) / FS_OUT
    y = np.interp(t, [0.0, 0.2, 0.8], [0.0, 1.0, 0.0])
    cycle = CycleFiducials(t_r=-0.1, t_min=0.0, t_max=0.2, t_md=0.1, t_min_next=0.8,
                           hi_max=1.0, hi_min=0.0, hi_md=0.5, hi_min_next=0.0)
    return make_series(y), cycle


@pytest.fixture
def informative_table():
    """5 informative + 37 noise features over 13 subjects x 10 trials x 3 segments."""
    rng = np.random.default_rng(11)
    n = 390
    X = rng.standard_normal((n, len(FEATURE_NAMES)))
    sbp = 120.0 + 6.0 * X[:, :5].sum(axis=1) + rng.normal(0.0, 0.5, n)
    groups = [f"S{i // 30 + 1:02d}/T{(i // 3) % 10 + 1:02d}" for i in range(n)]
    return make_table(X, sbp, groups, FEATURE_NAMES)
