import numpy as np
import pytest

from emotion.exceptions import ConfigurationError, TooShort
from emotion.spectral import (
    BANDS,
    band_powers,
    peak_frequency,
    periodogram_psd,
    spectral_entropy,
    welch_psd,
)

FS = 120.0


def direct_periodogram(x, fs):
    """Mean-removed, periodic-Hann, density-scaled one-sided DFT periodogram."""
    x = np.asarray(x, dtype=float) - np.mean(x)
    n = len(x)
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    spectrum = np.abs(np.fft.rfft(x * w)) ** 2 / (fs * np.sum(w ** 2))
    spectrum[1:-1] *= 2
    return np.fft.rfftfreq(n, 1 / fs), spectrum


def test_single_segment_matches_direct_dft():
    x = np.random.default_rng(0).normal(size=256)
    freqs, psd = welch_psd(x, FS, seg_len=256)
    ref_freqs, ref_psd = direct_periodogram(x, FS)
    np.testing.assert_allclose(freqs, ref_freqs)
    np.testing.assert_allclose(psd, ref_psd, rtol=1e-10, atol=1e-15)


def test_segments_are_averaged_periodograms():
    x = np.random.default_rng(1).normal(size=512)
    _, psd = welch_psd(x, FS, seg_len=256, overlap=0.5)
    parts = [direct_periodogram(x[start:start + 256], FS)[1] for start in (0, 128, 256)]
    np.testing.assert_allclose(psd, np.mean(parts, axis=0), rtol=1e-10, atol=1e-15)


def test_exact_bin_sine_stays_in_the_main_lobe():
    k = 10
    t = np.arange(1024) / FS
    x = np.sin(2 * np.pi * (k * FS / 256) * t)
    freqs, psd = welch_psd(x, FS, seg_len=256)
    assert int(np.argmax(psd)) == k
    assert psd[k - 1:k + 2].sum() / psd.sum() > 0.95
    ref = direct_periodogram(x[:256], FS)[1]
    assert int(np.argmax(ref)) == k


def test_parseval_on_white_noise():
    x = np.random.default_rng(2).normal(0.0, 1.0, 8192)
    freqs, psd = welch_psd(x, FS)
    power = psd.sum() * (freqs[1] - freqs[0])
    assert power == pytest.approx(np.var(x), rel=0.05)


def test_welch_rejects_short_input():
    with pytest.raises(TooShort):
        welch_psd(np.ones(100), FS, seg_len=256)


@pytest.mark.parametrize("seg_len", [100, 255, 1])
def test_welch_requires_power_of_two_segments(seg_len):
    with pytest.raises(ConfigurationError):
        welch_psd(np.ones(512), FS, seg_len=seg_len)


def test_periodogram_pads_short_subwindows():
    freqs, psd = periodogram_psd(np.random.default_rng(3).normal(size=150), FS)
    assert len(freqs) == 129
    assert freqs[1] == pytest.approx(FS / 256)


def test_band_powers_of_a_flat_spectrum():
    freqs = np.arange(0, 8.0, 0.25)
    psd = np.ones_like(freqs)
    np.testing.assert_allclose(band_powers(freqs, psd), [0.5, 0.5, 1.0, 2.0])
    assert len(BANDS) == 4


def test_peak_frequency_ignores_the_upper_spectrum_and_prefers_lower_ties():
    freqs = np.arange(0, 8.0, 0.5)
    psd = np.zeros_like(freqs)
    psd[[2, 4]] = 1.0
    psd[12] = 5.0  # 6 Hz, above the limit
    assert peak_frequency(freqs, psd) == 1.0


def test_spectral_entropy():
    freqs = np.arange(0, 4.0, 0.5)
    assert spectral_entropy(freqs, np.ones_like(freqs)) == pytest.approx(3.0)
    spike = np.zeros_like(freqs)
    spike[3] = 2.0
    assert spectral_entropy(freqs, spike) == 0.0
    assert spectral_entropy(freqs, np.zeros_like(freqs)) == 0.0
