# emotion/synth.py
"""
Seeded synthetic pupillometry sessions.

Each class gets its own stream, SeedSequence(seed, spawn_key=(label id,)),
so regenerating one class never disturbs another.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple

import numpy as np
from scipy.signal import lfilter

from .ingest import BLINK_SENTINEL, EmotionLabel, Recording, synthesize_clock, write_recording

logger = logging.getLogger(__name__)

AR_COEFFICIENT = 0.95
RIGHT_EYE_GAIN = 0.97
CLAMP_MM = (2.0, 5.0)
DECIMALS = 6  # sensor resolution in the raw logs


@dataclass(frozen=True)
class ClassParams:
    baseline_mm: float
    osc_freq_hz: float
    osc_amp_mm: float


DEFAULT_CLASS_PARAMS = (
    ClassParams(3.2, 0.2, 0.3),  # happy
    ClassParams(2.6, 0.4, 0.3),  # sad
    ClassParams(3.8, 0.8, 0.3),  # anger
    ClassParams(4.2, 1.5, 0.3),  # fear
)


@dataclass(frozen=True)
class SynthConfig:
    duration_s: float = 600.0
    sample_rate_hz: float = 120.0
    class_params: Tuple[ClassParams, ...] = field(default=DEFAULT_CLASS_PARAMS)
    noise_sigma_mm: float = 0.05
    drift_sigma_mm: float = 0.2
    drift_tau_s: float = 30.0
    blink_rate_per_min: float = 15.0
    blink_duration_ms: Tuple[float, float] = (100.0, 300.0)
    one_eye_dropout_prob: float = 0.002
    seed: int = 42

    def params(self, label: EmotionLabel) -> ClassParams:
        return self.class_params[int(label)]


def _ar1(rng, n, phi, innovation_sigma, stationary_start=False):
    innovations = rng.normal(0.0, innovation_sigma, n)
    if not stationary_start or phi >= 1:
        return lfilter([1.0], [1.0, -phi], innovations)
    start = rng.normal(0.0, innovation_sigma / np.sqrt(1.0 - phi ** 2))
    out, _ = lfilter([1.0], [1.0, -phi], innovations, zi=[phi * start])
    return out


def generate(cfg: SynthConfig, label: EmotionLabel) -> Recording:
    """
    left  = baseline + amp*sin(2*pi*f*t + phase) + AR(1) noise + slow drift, clamped
    right = 0.97*left + independent noise, clamped
    then blinks (both eyes -1) from a Poisson process and one-eye dropouts.
    """
    label = EmotionLabel(label)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(int(label),))))
    p = cfg.params(label)
    n = int(round(cfg.duration_s * cfg.sample_rate_hz))
    t = np.arange(n) / cfg.sample_rate_hz

    phase = rng.uniform(0.0, 2 * np.pi)
    noise = _ar1(rng, n, AR_COEFFICIENT, cfg.noise_sigma_mm)
    drift_phi = np.exp(-1.0 / (cfg.drift_tau_s * cfg.sample_rate_hz))
    drift = _ar1(rng, n, drift_phi, cfg.drift_sigma_mm * np.sqrt(1.0 - drift_phi ** 2), stationary_start=True)

    left = p.baseline_mm + p.osc_amp_mm * np.sin(2 * np.pi * p.osc_freq_hz * t + phase) + noise + drift
    left = np.clip(left, *CLAMP_MM)
    right = np.clip(RIGHT_EYE_GAIN * left + rng.normal(0.0, cfg.noise_sigma_mm, n), *CLAMP_MM)
    left, right = np.round(left, DECIMALS), np.round(right, DECIMALS)

    # blink onsets: Poisson count, uniform times
    n_blinks = rng.poisson(cfg.blink_rate_per_min * cfg.duration_s / 60.0)
    onsets = np.sort(rng.uniform(0.0, cfg.duration_s, n_blinks))
    durations = rng.uniform(*cfg.blink_duration_ms, n_blinks) / 1000.0
    blinked = np.zeros(n, dtype=bool)
    for onset, duration in zip(onsets, durations):
        lo, hi = np.searchsorted(t, [onset, onset + duration], side="left")
        blinked[lo:hi] = True
    left[blinked] = BLINK_SENTINEL
    right[blinked] = BLINK_SENTINEL

    dropout = rng.random(n) < cfg.one_eye_dropout_prob
    which_eye = rng.integers(0, 2, n)
    left[dropout & (which_eye == 0)] = BLINK_SENTINEL
    right[dropout & (which_eye == 1)] = BLINK_SENTINEL

    logger.debug("synth %s: %d samples, %d blinks", label.token, n, n_blinks)
    return Recording(
        t_ms=synthesize_clock(n, cfg.sample_rate_hz),
        left_mm=left,
        right_mm=right,
        label=label,
        source_name=f"session_{label.token}.csv",
        sample_rate_hz=cfg.sample_rate_hz,
    )


def generate_dataset(cfg: SynthConfig) -> List[Recording]:
    return [generate(cfg, label) for label in EmotionLabel]


def write_dataset(recordings, directory) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return [write_recording(rec, directory / rec.source_name) for rec in recordings]
