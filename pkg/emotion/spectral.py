"""Power spectral density estimation and band summaries for pupil traces."""

import numpy as np
from scipy import signal as sp_signal

from .exceptions import ConfigurationError, TooShort

# Half-open [lo, hi) bands in Hz; pupil dynamics live below 4 Hz.
BANDS = ((0.0, 0.5), (0.5, 1.0), (1.0, 2.0), (2.0, 4.0))
BAND_NAMES = ("b0_05", "b05_1", "b1_2", "b2_4")
SPECTRUM_LIMIT_HZ = 4.0
DEFAULT_SEG_LEN = 256
DEFAULT_OVERLAP = 0.5


def welch_psd(values, fs, seg_len=DEFAULT_SEG_LEN, overlap=DEFAULT_OVERLAP):
    """
    One-sided Welch PSD: mean-removed, Hann-tapered segments, density scaling
    (fs * sum(w**2)), averaged across segments.

    Returns
    -------
    freqs : np.ndarray
        Bin centres in Hz.
    psd : np.ndarray
        Power per Hz.
    """
    values = np.asarray(values, dtype=float)
    if seg_len < 2 or seg_len & (seg_len - 1):
        raise ConfigurationError(f"seg_len must be a power of two, got {seg_len}")
    if not 0 <= overlap < 1:
        raise ConfigurationError(f"overlap must lie in [0, 1), got {overlap}")
    if len(values) < seg_len:
        raise TooShort(f"{len(values)} samples, need at least {seg_len} for one Welch segment")

    return sp_signal.welch(
        values,
        fs=fs,
        window="hann",
        nperseg=seg_len,
        noverlap=int(seg_len * overlap),
        detrend="constant",
        scaling="density",
        return_onesided=True,
        average="mean",
    )


def periodogram_psd(values, fs, min_nfft=DEFAULT_SEG_LEN):
    """Single mean-removed Hann periodogram, zero-padded to at least ``min_nfft`` points."""
    values = np.asarray(values, dtype=float)
    nfft = max(min_nfft, 1 << int(np.ceil(np.log2(max(len(values), 1)))))
    return sp_signal.periodogram(
        values,
        fs=fs,
        window="hann",
        nfft=nfft,
        detrend="constant",
        scaling="density",
    )


def band_powers(freqs, psd, bands=BANDS):
    """Sum of psd * df over bins whose centre falls in each band."""
    df = freqs[1] - freqs[0] if len(freqs) > 1 else 0.0
    return np.array([psd[(freqs >= lo) & (freqs < hi)].sum() * df for lo, hi in bands])


def peak_frequency(freqs, psd, limit=SPECTRUM_LIMIT_HZ):
    """Centre of the strongest bin below ``limit``; ties go to the lowest frequency."""
    mask = freqs < limit
    return float(freqs[mask][np.argmax(psd[mask])])


def spectral_entropy(freqs, psd, limit=SPECTRUM_LIMIT_HZ):
    """Shannon entropy (bits) of the normalised spectrum below ``limit``; 0 for an empty spectrum."""
    p = psd[freqs < limit]
    total = p.sum()
    if total <= 0:
        return 0.0
    p = p[p > 0] / total
    return float(-(p * np.log2(p)).sum())
