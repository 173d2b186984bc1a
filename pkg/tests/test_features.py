from dataclasses import replace

import numpy as np
import pytest

from brainz_bp.dataset_io import FEATURE_NAMES, LabeledSegment, ProcessedSeries, SeriesKind
from brainz_bp.errors import ConstantSegment, NoValidCycles, TooFewPeaks
from brainz_bp.features import entropy as entropy_module
from brainz_bp.features import (approximate_entropy, check_invariants, diff_features, entropy_features, extract_all,
                                extract_segment, extract_table, heart_rate, height_features, ptt_features,
                                sample_entropy, signal_quality, slope_features, stat_features, width_features)
from brainz_bp.fiducial import NO_NEXT_MINIMUM, ORDERING_VIOLATION, CycleFiducials, detect_cycle_fiducials, detect_r_peaks
from conftest import FS_OUT, make_series


def _cycle(**overrides) -> CycleFiducials:
    base = dict(t_r=0.0, t_min=0.1, t_max=0.3, t_md=0.15, t_min_next=1.1, hi_max=6.0, hi_min=2.0, hi_md=3.0,
                hi_min_next=2.0)
    base.update(overrides)
    return CycleFiducials(**base)


@pytest.fixture(scope="module")
def clean_cycles(clean_series):
    biz_abs, _, _, ecg = clean_series
    return detect_cycle_fiducials(biz_abs, detect_r_peaks(ecg))


@pytest.fixture(scope="module")
def clean_segments(clean_series):
    biz_abs, _, _, ecg = clean_series
    out = []
    for index, start in enumerate((0, 1000)):
        step = f"segment:index={index}"
        out.append(LabeledSegment(biz_abs.slice(start, start + 4000, step), ecg.slice(start, start + 4000, step),
                                  120.0, 80.0, index, "S01/T01"))
    return out


# ----- transit times -----

def test_ptt_single_cycle():
    group = ptt_features([_cycle()])
    assert group["PTT_min"] == pytest.approx(0.1)
    assert group["PAT"] == pytest.approx(0.15)
    assert group["PTT_max"] == pytest.approx(0.3)


def test_ptt_is_mean_over_cycles_and_skips_flagged():
    cycles = [_cycle(), _cycle(t_r=1.0, t_min=1.14, t_md=1.2, t_max=1.4),
              _cycle(t_min=0.5, flags=(ORDERING_VIOLATION,))]
    group = ptt_features(cycles)
    assert group["PTT_min"] == pytest.approx(0.12)
    assert group.n_excluded == 1


def test_missing_next_minimum_only_matters_for_width():
    cycles = [_cycle(flags=(NO_NEXT_MINIMUM,))]
    assert ptt_features(cycles)["PTT_min"] == pytest.approx(0.1)
    with pytest.raises(NoValidCycles):
        slope_features(cycles)


def test_no_usable_cycles():
    with pytest.raises(NoValidCycles):
        ptt_features([_cycle(flags=(ORDERING_VIOLATION,))])


# ----- widths and slopes -----

def test_triangle_widths(triangle):
    series, cycle = triangle
    group = width_features([cycle], series)
    expected = {"SW": 0.2, "DW": 0.6, "PW": 0.8, "PW50": 0.4, "PWR50": 0.5, "PW25": 0.6, "PWR25": 0.75,
                "SW50": 0.1, "DW50": 0.3, "SW90": 0.02, "DW90": 0.06}
    for name, value in expected.items():
        assert group[name] == pytest.approx(value, abs=1e-9), name
    assert not group.flags


def test_triangle_slopes(triangle):
    _, cycle = triangle
    group = slope_features([cycle])
    assert group["AS"] == pytest.approx(5.0)
    assert group["DS"] == pytest.approx(-1.0 / 0.6)


def test_width_level_not_crossed(triangle):
    series, cycle = triangle
    # cut at 0.6 s the descent never reaches the 25 % level
    truncated = make_series(series.values[:301])
    group = width_features([replace(cycle, t_min_next=0.6, hi_min_next=1 / 3)], truncated)
    assert np.isnan(group["PW25"])
    assert group.flags["PW25"] == "LevelNotCrossed"


# ----- heights -----

def test_heights_and_ratios():
    group = height_features([_cycle()])
    assert group["PP"] == pytest.approx(4.0)
    assert group["HIR_max"] == pytest.approx(3.0)
    assert group["HIR_MD"] == pytest.approx(1.5)


def test_zero_min_height_flags_ratios():
    group = height_features([_cycle(hi_min=0.0)])
    assert np.isnan(group["HIR_max"]) and np.isnan(group["HIR_MD"])
    assert group.flags == {"HIR_max": "ZeroMinHeight", "HIR_MD": "ZeroMinHeight"}
    assert group["PP"] == 6.0


# ----- difference lobe -----

def _ramp():
    """Rise of 1 per sample for 100 samples, then fall of 0.25 per sample back to 0."""
    k = np.arange(501)
    y = np.where(k <= 100, k.astype(float), 100.0 - 0.25 * (k - 100))
    cycle = CycleFiducials(t_r=-0.05, t_min=0.0, t_max=0.2, t_md=0.1, t_min_next=1.0,
                           hi_max=100.0, hi_min=0.0, hi_md=50.0, hi_min_next=0.0)
    return make_series(y), cycle


def test_difference_lobe_of_ramp():
    series, cycle = _ramp()
    group = diff_features([cycle], series)
    assert group["HId_max"] == pytest.approx(500.0)
    assert group["PWd"] == pytest.approx(99.8 / FS_OUT)
    assert group["PWd50"] == pytest.approx(99.4 / FS_OUT)
    assert group["PWRd"] == pytest.approx(99.4 / 99.8)
    assert group["DSd"] == pytest.approx(-500.0 / (99.8 / FS_OUT))
    # the lobe starts at its own maximum, so the ascending slope is undefined
    assert np.isnan(group["ASd"])
    assert group.flags["ASd"] == "DegenerateDifference"


def test_difference_features_scale_with_amplitude(clean_series, clean_cycles):
    biz = clean_series[0]
    scaled = biz.with_step(3.0 * biz.values, "scale")
    base = diff_features(clean_cycles, biz)
    tripled = diff_features(clean_cycles, scaled)
    for name in ("HId_max", "ASd", "DSd"):
        assert tripled[name] == pytest.approx(3.0 * base[name], rel=1e-9)
    for name in ("PWd", "PWd50", "PWRd"):
        assert tripled[name] == pytest.approx(base[name], rel=1e-9)


# ----- statistics -----

def _moments(x):
    d = x - x.mean()
    m2, m3, m4 = (np.mean(d ** k) for k in (2, 3, 4))
    return m3 / m2 ** 1.5, m4 / m2 ** 2


def test_symmetric_values_have_zero_skew():
    group = stat_features(np.array([-1.0, 0.0, 1.0]))
    assert group["Skew"] == pytest.approx(0.0)
    assert group["SD"] == pytest.approx(1.0)


def test_stats_against_moments():
    x = np.array([0.0, 0.0, 0.0, 1.0])
    skew, kurt = _moments(x)
    group = stat_features(x)
    assert group["SD"] == pytest.approx(0.5)
    assert group["Skew"] == pytest.approx(skew)
    assert group["Kurt"] == pytest.approx(kurt)


def test_gaussian_kurtosis_is_three():
    x = np.random.default_rng(4).standard_normal(200_000)
    assert stat_features(x)["Kurt"] == pytest.approx(3.0, abs=0.05)


def test_constant_segment():
    group = stat_features(np.full(10, 2.0))
    assert group["SD"] == 0.0
    assert np.isnan(group["Skew"])
    assert group.flags["Kurt"] == "ConstantSegment"
    with pytest.raises(ConstantSegment):
        stat_features(np.ones(2))


# ----- entropy -----

def _brute_entropies(x, m, r):
    n = len(x)

    def templates(length, count):
        return [x[i:i + length] for i in range(count)]

    def phi(length):
        t = templates(length, n - length + 1)
        c = [sum(np.max(np.abs(a - b)) <= r for b in t) / len(t) for a in t]
        return np.mean(np.log(c))

    def pairs(length):
        t = templates(length, n - m)
        return sum(np.max(np.abs(t[i] - t[j])) <= r for i in range(len(t)) for j in range(len(t)) if i != j)

    return phi(m) - phi(m + 1), -np.log(pairs(m + 1) / pairs(m))


@pytest.mark.parametrize("seed", [0, 1])
def test_entropy_matches_brute_force(seed):
    x = np.random.default_rng(seed).standard_normal(80).cumsum()
    r = 0.2 * np.std(x, ddof=1)
    apen, sampen = _brute_entropies(x, 2, r)
    assert approximate_entropy(x, 2, r) == pytest.approx(apen, rel=1e-12)
    assert sample_entropy(x, 2, r) == pytest.approx(sampen, rel=1e-12)


def test_entropy_row_blocks_do_not_change_counts(monkeypatch):
    x = np.sin(np.arange(1300) * 0.37) + 0.1 * np.random.default_rng(3).standard_normal(1300)
    reference = (approximate_entropy(x, 2, 0.2), sample_entropy(x, 2, 0.2))
    monkeypatch.setattr(entropy_module, "_ROW_BLOCK", 7)
    assert (approximate_entropy(x, 2, 0.2), sample_entropy(x, 2, 0.2)) == reference


def test_constant_series_has_zero_sample_entropy():
    group = entropy_features(np.full(200, 3.0))
    assert group["SampEn"] == 0.0
    assert group["ApEn"] == pytest.approx(0.0)


def test_noise_is_less_regular_than_a_sine():
    t = np.arange(1000) / FS_OUT
    sine = entropy_features(np.sin(2 * np.pi * 1.2 * t))
    noise = entropy_features(np.random.default_rng(8).standard_normal(1000))
    assert noise["SampEn"] > sine["SampEn"]
    assert noise["ApEn"] > sine["ApEn"]


def test_short_series_entropy_is_undefined():
    group = entropy_features(np.arange(50.0))
    assert np.isnan(group["SampEn"])
    assert group.flags["ApEn"] == "UndefinedEntropy"


# ----- heart rate -----

@pytest.mark.parametrize("rr, bpm", [(1.0, 60.0), (0.75, 80.0)])
def test_heart_rate(rr, bpm):
    assert heart_rate(np.arange(9) * rr + 0.3) == pytest.approx(bpm)


def test_heart_rate_needs_two_peaks():
    with pytest.raises(TooFewPeaks):
        heart_rate([1.0])


# ----- segment extraction -----

def test_clean_segment_vector(clean_segments, clean_config):
    vector = extract_all(clean_segments[0])
    assert vector.valid, vector.reasons
    assert len(vector.values) == len(FEATURE_NAMES) == 42
    assert vector["HR"] == pytest.approx(72.0, abs=0.5)
    assert vector["PTT_min"] == pytest.approx(clean_config.ptt_s, abs=2.0 / FS_OUT)
    assert vector["PP"] == pytest.approx(clean_config.delta_z_ohm, rel=0.01)
    assert vector["PW"] == pytest.approx(vector["SW"] + vector["DW"])
    assert not check_invariants(vector.as_dict())


def test_flat_ecg_gives_invalid_vector(clean_segments):
    seg = clean_segments[0]
    flat = ProcessedSeries(np.zeros(len(seg.ecg)), seg.ecg.sample_rate_hz, SeriesKind.ECG, (), seg.ecg.t0_s)
    vector = extract_all(replace(seg, ecg=flat))
    assert not vector.valid
    assert vector.reasons == ("NoPeaksFound",)
    assert np.all(np.isnan(vector.values))
    assert vector.sbp_mmhg == 120.0


def test_extraction_is_stateless(clean_segments):
    a, b = clean_segments
    forward = [extract_all(a).values, extract_all(b).values]
    backward = [extract_all(b).values, extract_all(a).values]
    assert np.array_equal(forward[0], backward[1])
    assert np.array_equal(forward[1], backward[0])


def test_extract_table_is_ordered_and_thread_independent(clean_segments):
    single = extract_table(clean_segments, threads=1)
    double = extract_table(clean_segments, threads=2)
    assert single.equals(double)
    assert list(single.segment_index) == [0, 1]


def test_extract_segment_keeps_fiducials(clean_segments):
    result = extract_segment(clean_segments[0])
    assert len(result.cycles) == len(result.r_times) - 1
    assert result.vector.valid


def test_excluded_cycle_count_reaches_vector(clean_segments):
    for seg in clean_segments:
        result = extract_segment(seg)
        flagged = sum(1 for c in result.cycles if c.flags)
        assert result.vector.n_excluded_cycles == result.n_excluded == flagged
    table = extract_table(clean_segments)
    assert list(table.n_excluded_cycles) == [extract_segment(s).n_excluded for s in clean_segments]


def test_signal_quality(clean_series, clean_cycles, clean_config):
    quality = signal_quality(clean_series[0], clean_cycles)
    assert quality.delta_z_mean == pytest.approx(clean_config.delta_z_ohm, rel=0.01)
    assert quality.delta_z_sd < 0.5
    assert quality.n_cycles >= 9
    assert np.isfinite(quality.sampen_mean)


def test_invariant_check_reports_broken_identity():
    values = dict.fromkeys(FEATURE_NAMES, 1.0)
    values.update({"PW": 3.0, "SW": 1.0, "DW": 1.0, "PP": 0.0, "HI_max": 1.0, "HI_min": 1.0})
    values.update({"PWR25": 0.9, "PWR50": 0.8, "PWR75": 0.5, "PWR90": 0.3})
    assert check_invariants(values) == ["PW=SW+DW"]
