import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from synchronizer.dsp import (
    cross_correlate_offset,
    fractional_delay,
    gcc_phat,
    get_window,
    golden_section_max,
    lag_search,
    one_sided_to_full,
    stft,
)
from synchronizer.errors import DegenerateInputError, InsufficientSamplesError, InvalidArgumentError


# ─── stft ────────────────────────────────────────────────────────────────────

def test_stft_frame_count_and_bins(white_noise):
    x = white_noise(10000)
    spec = stft(x, 1024, 256)
    assert spec.num_frames == (10000 - 1024) // 256 + 1
    assert spec.num_bins == 1024


def test_stft_rejects_non_power_of_two():
    with pytest.raises(InvalidArgumentError):
        stft(np.ones(4096), 1000, 250)


def test_stft_short_signal():
    with pytest.raises(InsufficientSamplesError):
        stft(np.ones(100), 256, 128)


def test_stft_rectangular_frame_matches_fft(white_noise):
    x = white_noise(512)
    spec = stft(x, 256, 256, window='rectangular')
    np.testing.assert_allclose(spec.frames[1], np.fft.fft(x[256:512]))


def test_unknown_window():
    with pytest.raises(InvalidArgumentError):
        get_window('kaiser', 64)


def test_one_sided_to_full_is_conjugate_symmetric(white_noise):
    full = np.fft.fft(white_noise(64))
    np.testing.assert_allclose(one_sided_to_full(full[:33], 64), full)


# ─── cross-correlation ───────────────────────────────────────────────────────

@pytest.mark.parametrize('delay', [-37, 0, 5, 120])
def test_cross_correlate_offset_sign(white_noise, delay):
    x = white_noise(4096)
    y = np.roll(x, delay)
    peak = cross_correlate_offset(x, y, 200)
    assert peak.lag == delay
    assert not peak.at_boundary


def test_cross_correlate_offset_boundary_flag():
    x = np.zeros(512)
    y = np.zeros(512)
    x[100] = 1.0
    y[180] = 1.0
    y[140] = 0.5
    peak = cross_correlate_offset(x, y, 40)
    assert peak.lag == 40
    assert peak.at_boundary


def test_cross_correlate_offset_zero_input():
    with pytest.raises(DegenerateInputError):
        cross_correlate_offset(np.zeros(128), np.ones(128), 10)


def test_cross_correlate_offset_max_lag_too_large():
    with pytest.raises(InvalidArgumentError):
        cross_correlate_offset(np.ones(16), np.ones(16), 16)


# ─── golden section ──────────────────────────────────────────────────────────

def test_golden_section_finds_parabola_peak():
    result = golden_section_max(lambda t: -(t - 0.3) ** 2, -1.0, 1.0, tol=1e-6)
    assert result == pytest.approx(0.3, abs=1e-6)


def test_golden_section_bad_bracket():
    with pytest.raises(InvalidArgumentError):
        golden_section_max(lambda t: t, 1.0, 1.0)


# ─── lag search / GCC-PhaT ───────────────────────────────────────────────────

@pytest.mark.parametrize('lag', [-3.25, -0.4, 0.0, 1.7, 2.5])
def test_lag_search_linear_phase(lag):
    n = 1024
    k = np.arange(n // 2 + 1)
    spectrum = one_sided_to_full(np.exp(2j * np.pi * k * lag / n), n)
    result = lag_search(spectrum, 8)
    # IFFT convention: exp(j2πkλ0/N) peaks at -λ0
    assert result.refined_lag == pytest.approx(-lag, abs=1e-3)


def test_lag_search_all_zero():
    with pytest.raises(DegenerateInputError):
        lag_search(np.zeros(64, dtype=complex), 4)


def test_lag_search_non_power_of_two():
    with pytest.raises(InvalidArgumentError):
        lag_search(np.ones(100, dtype=complex), 4)


@settings(deadline=None)
@given(delay=st.floats(min_value=-64.0, max_value=64.0, allow_nan=False), seed=st.integers(0, 2 ** 16))
def test_gcc_phat_recovers_delay(delay, seed):
    x = np.random.default_rng(seed).standard_normal(1 << 14)
    result = gcc_phat(x, fractional_delay(x, delay), 128)
    assert result.refined_lag == pytest.approx(delay, abs=0.05)


def test_gcc_phat_integer_delay(white_noise):
    x = white_noise(1 << 12)
    result = gcc_phat(x, np.roll(x, 17), 64)
    assert result.integer_lag == 17
    assert result.refined_lag == pytest.approx(17.0, abs=0.01)


def test_gcc_phat_rejects_unequal_lengths():
    with pytest.raises(InvalidArgumentError):
        gcc_phat(np.ones(64), np.ones(32), 4)


def test_gcc_phat_zero_segment():
    with pytest.raises(DegenerateInputError):
        gcc_phat(np.zeros(64), np.ones(64), 4)


# ─── fractional delay ────────────────────────────────────────────────────────

def test_fractional_delay_integer_is_exact_shift(white_noise):
    x = white_noise(256)
    y = fractional_delay(x, 5.0)
    np.testing.assert_allclose(y[5:], x[:-5])
    assert np.all(y[:5] == 0.0)


def test_fractional_delay_half_sample_on_sine():
    n = np.arange(4096)
    freq = 0.01
    y = fractional_delay(np.sin(2 * np.pi * freq * n), 0.5)
    expected = np.sin(2 * np.pi * freq * (n - 0.5))
    np.testing.assert_allclose(y[100:-100], expected[100:-100], atol=1e-3)
