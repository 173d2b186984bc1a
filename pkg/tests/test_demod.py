import logging

import numpy as np
import pytest

from brainz_bp.dataset_io import RawRecording, SeriesKind
from brainz_bp.demod import BlockEstimate, demodulate, estimate_block, impedance_from_block
from brainz_bp.errors import AliasedExcitation, BlockTooShort, DegenerateBlock

FS = 100_000.0
F_EXC = 10_000.0
R0 = 10_000.0


def _carrier(n=200, amplitude=1.0, phase=0.0, offset=0.0):
    t = np.arange(n) / FS
    return offset + amplitude * np.sin(2 * np.pi * F_EXC * t + phase)


def _recording(vs, vr, ecg=None):
    ecg = np.zeros(len(vs)) if ecg is None else ecg
    return RawRecording(vs, vr, ecg, FS, F_EXC, R0)


def test_block_fit_recovers_sinusoid():
    est = estimate_block(_carrier(amplitude=0.7, phase=0.3, offset=0.1), _carrier(amplitude=0.2, phase=-0.4), F_EXC, FS)
    assert est.a_s == pytest.approx(0.7, rel=1e-10)
    assert est.phi_s == pytest.approx(0.3, abs=1e-10)
    assert est.a_r == pytest.approx(0.2, rel=1e-10)
    assert est.phi_r == pytest.approx(-0.4, abs=1e-10)


def test_flat_reference_is_degenerate():
    with pytest.raises(DegenerateBlock):
        estimate_block(_carrier(), np.zeros(200), F_EXC, FS)


@pytest.mark.parametrize("ratio, expected", [(2.0, 10_000.0), (1.0, 0.0)])
def test_real_impedance_from_amplitude_ratio(ratio, expected):
    z = impedance_from_block(BlockEstimate(ratio, 0.5, 1.0, 0.5), R0)
    assert z.real_ohm == pytest.approx(expected, abs=1e-9)
    assert z.imag_ohm == pytest.approx(0.0, abs=1e-9)
    assert z.abs_ohm == pytest.approx(expected, abs=1e-9)


def test_complex_impedance_oracle():
    est = estimate_block(_carrier(), _carrier(amplitude=1 / 1.01, phase=-0.02), F_EXC, FS)
    z = impedance_from_block(est, R0)
    expected = (1.01 * np.exp(0.02j) - 1.0) * R0
    assert z.real_ohm == pytest.approx(expected.real, abs=1e-6)
    assert z.imag_ohm == pytest.approx(expected.imag, abs=1e-6)
    assert z.abs_ohm == pytest.approx(abs(expected), abs=1e-6)


def test_noise_free_demodulation_recovers_impedance(clean_trial, clean_series):
    _, truth = clean_trial
    biz_abs, biz_real, biz_imag, _ = clean_series
    assert np.allclose(biz_abs.values, truth.clean_impedance, atol=1e-6)
    assert np.allclose(biz_real.values, truth.clean_impedance, atol=1e-6)
    assert np.allclose(biz_imag.values, 0.0, atol=1e-6)


def test_output_rate_and_alignment(clean_trial, clean_series):
    rec, truth = clean_trial
    biz_abs, _, _, ecg = clean_series
    assert len(biz_abs) == rec.n_samples // 200 == len(ecg)
    assert biz_abs.sample_rate_hz == 500.0
    assert biz_abs.kind is SeriesKind.BIOZ_ABS and ecg.kind is SeriesKind.ECG
    assert biz_abs.t0_s == pytest.approx(199 / (2 * FS))
    assert np.allclose(biz_abs.times, truth.block_times_s)
    assert biz_abs.processing_log[0].startswith("demod:n_block=200")


def test_constant_ecg_block_mean():
    rec = _recording(_carrier(1000), _carrier(1000, amplitude=0.5), np.ones(1000))
    *_, ecg = demodulate(rec, 200)
    assert np.all(ecg.values == 1.0)


def test_partial_block_is_dropped(caplog):
    rec = _recording(_carrier(450), _carrier(450, amplitude=0.5))
    with caplog.at_level(logging.WARNING, logger="brainz_bp.demod"):
        biz_abs, *_ = demodulate(rec, 200)
    assert len(biz_abs) == 2
    assert "partial block" in caplog.text


def test_aliased_excitation():
    rec = RawRecording(_carrier(1000), _carrier(1000), np.zeros(1000), FS, F_EXC, R0)
    with pytest.raises(AliasedExcitation):
        demodulate(rec, 200, excitation_freq_hz=30_000.0)


def test_block_too_short():
    rec = _recording(_carrier(1000), _carrier(1000, amplitude=0.5))
    with pytest.raises(BlockTooShort):
        demodulate(rec, 5)


def test_flat_block_inside_recording():
    vr = _carrier(1000, amplitude=0.5)
    vr[400:600] = 0.0
    with pytest.raises(DegenerateBlock) as info:
        demodulate(_recording(_carrier(1000), vr), 200)
    assert info.value.details["block_index"] == 2
