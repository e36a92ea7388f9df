# emotion/features.py
import hashlib
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, NamedTuple, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .exceptions import ConfigurationError, DegenerateWindow, EmptyOutput, InputFormatError, TooShort
from .ingest import EmotionLabel, synthesize_clock
from .preprocess import CleanSeries
from .spectral import (
    BAND_NAMES,
    DEFAULT_OVERLAP,
    DEFAULT_SEG_LEN,
    SPECTRUM_LIMIT_HZ,
    band_powers,
    peak_frequency,
    periodogram_psd,
    spectral_entropy,
    welch_psd,
)

logger = logging.getLogger(__name__)

MIN_WINDOW_SAMPLES = 64
N_SUBWINDOWS = 4

TIME_NAMES = ("mean", "std", "kurtosis", "min", "max", "range", "median", "mean_abs_diff", "std_diff", "skewness")
FREQ_NAMES = tuple(f"power_{b}" for b in BAND_NAMES) + ("power_total", "peak_freq", "entropy")
TF_NAMES = tuple(f"{b}_{stat}" for b in BAND_NAMES for stat in ("mean", "std"))
CROSS_NAMES = ("cov", "corr", "mean_diff")

EYES = {"le": "LE", "re": "RE", "xy": "cross"}
DOMAINS = {"time": "time", "freq": "freq", "tf": "timefreq"}

# core tier: mean, std, covariance, kurtosis and PSD band features
CORE_FEATURES = frozenset(
    [f"{eye}_time_{n}" for eye in ("le", "re") for n in ("mean", "std", "kurtosis")]
    + [f"{eye}_freq_{n}" for eye in ("le", "re") for n in FREQ_NAMES[:5]]
    + ["xy_time_cov"]
)


class FeatureDescriptor(NamedTuple):
    name: str
    eye: str  # LE | RE | cross
    domain: str  # time | freq | timefreq
    tier: str  # core | extended


def describe(name: str) -> FeatureDescriptor:
    """Descriptor for a column named ``{le|re|xy}_{time|freq|tf}_{stat}``."""
    parts = name.split("_", 2)
    if len(parts) != 3 or parts[0] not in EYES or parts[1] not in DOMAINS:
        raise InputFormatError(f"not a feature column name: {name!r}")
    tier = "core" if name in CORE_FEATURES else "extended"
    return FeatureDescriptor(name, EYES[parts[0]], DOMAINS[parts[1]], tier)


def build_catalog() -> tuple:
    names = []
    for eye in ("le", "re"):
        names += [f"{eye}_time_{n}" for n in TIME_NAMES]
        names += [f"{eye}_freq_{n}" for n in FREQ_NAMES]
        names += [f"{eye}_tf_{n}" for n in TF_NAMES]
    names += [f"xy_time_{n}" for n in CROSS_NAMES]
    return tuple(describe(n) for n in names)


CATALOG = build_catalog()
FEATURE_NAMES = tuple(d.name for d in CATALOG)


def catalog_fingerprint(names: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(names).encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class WindowConfig:
    window_s: float = 5.0
    hop_s: float = 2.5
    min_fill: float = 0.8

    def expected_samples(self, sample_rate_hz: float) -> float:
        return self.window_s * sample_rate_hz

    def min_samples(self, sample_rate_hz: float) -> int:
        return math.ceil(self.min_fill * self.expected_samples(sample_rate_hz) - 1e-9)

    def validate(self, sample_rate_hz: float, seg_len: int = DEFAULT_SEG_LEN) -> None:
        """Every window that passes the fill check must feed one Welch segment and four sub-windows."""
        if not 0 < self.hop_s <= self.window_s:
            raise ConfigurationError(f"need 0 < hop_s <= window_s, got hop_s={self.hop_s}, window_s={self.window_s}")
        if not 0 < self.min_fill <= 1:
            raise ConfigurationError(f"min_fill must lie in (0, 1], got {self.min_fill}")
        needed = max(seg_len, N_SUBWINDOWS * MIN_WINDOW_SAMPLES)
        if self.min_samples(sample_rate_hz) < needed:
            raise ConfigurationError(
                f"window of {self.window_s}s at {sample_rate_hz} Hz with min_fill {self.min_fill} may keep "
                f"{self.min_samples(sample_rate_hz)} samples, features need {needed}"
            )


class Window(NamedTuple):
    source_name: str
    start_ms: int
    left_mm: np.ndarray
    right_mm: np.ndarray


def make_windows(series: CleanSeries, cfg: WindowConfig, seg_len: int = DEFAULT_SEG_LEN) -> List[Window]:
    """
    Timestamp-based windows [start, start + window_s), hop_s apart, starting at 0.
    Windows run to the end of the original recording, dropped samples included.
    """
    cfg.validate(series.sample_rate_hz, seg_len)
    if len(series) == 0:
        return []
    window_ms = cfg.window_s * 1000.0
    hop_ms = cfg.hop_s * 1000.0
    step_ms = 1000.0 / series.sample_rate_hz
    recorded = synthesize_clock(len(series) + series.dropped_count, series.sample_rate_hz)
    end_ms = max(series.t_ms[-1], recorded[-1]) + step_ms
    needed = cfg.min_samples(series.sample_rate_hz)

    windows = []
    k = 0
    while k * hop_ms + window_ms <= end_ms + 1e-9:
        start = k * hop_ms
        lo, hi = np.searchsorted(series.t_ms, [start, start + window_ms], side="left")
        if hi - lo >= needed:
            windows.append(Window(series.source_name, int(round(start)), series.left_mm[lo:hi], series.right_mm[lo:hi]))
        k += 1
    return windows


def _check_varies(values: np.ndarray, what: str) -> None:
    if len(values) < 3:
        raise TooShort(f"{what}: {len(values)} samples, need at least 3")
    if np.ptp(values) == 0:
        raise DegenerateWindow(f"{what}: all {len(values)} values equal {values[0]!r}")


def time_features(values) -> np.ndarray:
    """mean, std, kurtosis, min, max, range, median, mean_abs_diff, std_diff, skewness."""
    x = np.asarray(values, dtype=float)
    _check_varies(x, "time features")
    diffs = np.diff(x)
    return np.array([
        x.mean(),
        x.std(ddof=1),
        stats.kurtosis(x, fisher=False, bias=True),
        x.min(),
        x.max(),
        np.ptp(x),
        np.median(x),
        np.abs(diffs).mean(),
        diffs.std(ddof=1),
        stats.skew(x, bias=True),
    ])


def cross_features(left, right) -> np.ndarray:
    """cov(LE, RE), corr(LE, RE), mean(LE - RE); N-1 normalisation."""
    le = np.asarray(left, dtype=float)
    re_ = np.asarray(right, dtype=float)
    _check_varies(le, "left eye")
    _check_varies(re_, "right eye")
    cov = np.cov(le, re_, ddof=1)[0, 1]
    corr = np.clip(cov / (le.std(ddof=1) * re_.std(ddof=1)), -1.0, 1.0)
    return np.array([cov, corr, (le - re_).mean()])


def freq_features(values, fs, seg_len=DEFAULT_SEG_LEN, overlap=DEFAULT_OVERLAP) -> np.ndarray:
    """Four band powers, total 0-4 Hz power, peak frequency, spectral entropy."""
    x = np.asarray(values, dtype=float)
    freqs, psd = welch_psd(x, fs, seg_len, overlap)
    if np.ptp(x) == 0:
        return np.zeros(len(FREQ_NAMES))
    bands = band_powers(freqs, psd)
    total = band_powers(freqs, psd, ((0.0, SPECTRUM_LIMIT_HZ),))[0]
    return np.concatenate([bands, [total, peak_frequency(freqs, psd), spectral_entropy(freqs, psd)]])


def timefreq_features(values, fs) -> np.ndarray:
    """Mean and std of each band's power across four equal sub-windows."""
    x = np.asarray(values, dtype=float)
    size = len(x) // N_SUBWINDOWS
    if size < MIN_WINDOW_SAMPLES:
        raise TooShort(f"{len(x)} samples split into sub-windows of {size}, need {MIN_WINDOW_SAMPLES}")
    powers = np.array([
        band_powers(*periodogram_psd(x[i * size:(i + 1) * size], fs)) for i in range(N_SUBWINDOWS)
    ])
    means = powers.mean(axis=0)
    stds = powers.std(axis=0, ddof=1)
    return np.column_stack([means, stds]).ravel()


def window_features(window: Window, fs, seg_len=DEFAULT_SEG_LEN, overlap=DEFAULT_OVERLAP) -> np.ndarray:
    """One catalog-ordered row for a window."""
    parts = []
    for values in (window.left_mm, window.right_mm):
        parts.append(time_features(values))
        parts.append(freq_features(values, fs, seg_len, overlap))
        parts.append(timefreq_features(values, fs))
    parts.append(cross_features(window.left_mm, window.right_mm))
    return np.concatenate(parts)


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    rows: np.ndarray
    labels: np.ndarray
    catalog: tuple
    provenance: tuple

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64).reshape(len(self.labels), len(self.catalog))
        if not np.isfinite(rows).all():
            raise ValueError("feature matrix holds non-finite values")
        if len(self.provenance) != len(rows):
            raise ValueError("rows, labels and provenance must have equal length")
        rows.setflags(write=False)
        labels = np.array(self.labels, dtype=np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "catalog", tuple(self.catalog))
        object.__setattr__(self, "provenance", tuple((str(s), int(t)) for s, t in self.provenance))

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def names(self) -> tuple:
        return tuple(d.name for d in self.catalog)

    @property
    def fingerprint(self) -> str:
        return catalog_fingerprint(self.names)

    def take(self, indices) -> "FeatureMatrix":
        idx = np.asarray(indices, dtype=np.int64)
        return FeatureMatrix(self.rows[idx], self.labels[idx], self.catalog, [self.provenance[i] for i in idx])

    def select(self, names: Sequence[str]) -> "FeatureMatrix":
        position = {n: i for i, n in enumerate(self.names)}
        missing = [n for n in names if n not in position]
        if missing:
            raise InputFormatError(f"feature matrix lacks columns: {', '.join(missing)}")
        cols = [position[n] for n in names]
        return FeatureMatrix(self.rows[:, cols], self.labels, [self.catalog[c] for c in cols], self.provenance)

    def to_csv(self, path) -> Path:
        path = Path(path)
        frame = pd.DataFrame(self.rows, columns=list(self.names))
        frame.insert(0, "label", [EmotionLabel(int(y)).token for y in self.labels])
        frame["source"] = [s for s, _ in self.provenance]
        frame["start_ms"] = [t for _, t in self.provenance]
        frame.to_csv(path, index=False, lineterminator="\n")
        return path

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        frame = pd.read_csv(path, float_precision="round_trip", dtype={"label": str, "source": str})
        columns = list(frame.columns)
        if len(columns) < 4 or columns[0] != "label" or columns[-2:] != ["source", "start_ms"]:
            raise InputFormatError(f"{path}: expected columns label, <features...>, source, start_ms")
        names = columns[1:-2]
        try:
            labels = [EmotionLabel.from_token(t) for t in frame["label"]]
        except ValueError as exc:
            raise InputFormatError(f"{path}: {exc}") from None
        return cls(
            rows=frame[names].to_numpy(dtype=np.float64),
            labels=labels,
            catalog=[describe(n) for n in names],
            provenance=list(zip(frame["source"], frame["start_ms"])),
        )


def extract(series_list: Sequence[CleanSeries], cfg: WindowConfig = WindowConfig(),
            seg_len: int = DEFAULT_SEG_LEN, overlap: float = DEFAULT_OVERLAP) -> FeatureMatrix:
    """Windows every series in input order and stacks their catalog rows."""
    if not series_list:
        raise EmptyOutput("no series to extract features from")
    rows, labels, provenance = [], [], []
    dropped = 0
    for series in series_list:
        for window in make_windows(series, cfg, seg_len):
            try:
                rows.append(window_features(window, series.sample_rate_hz, seg_len, overlap))
            except (DegenerateWindow, TooShort) as exc:
                dropped += 1
                logger.debug("%s@%dms dropped: %s", window.source_name, window.start_ms, exc)
                continue
            labels.append(int(series.label))
            provenance.append((window.source_name, window.start_ms))
    if dropped:
        logger.info("dropped %d degenerate or short windows", dropped)
    if not rows:
        raise EmptyOutput(f"no window survived feature extraction ({dropped} dropped)")
    logger.info("extracted %d windows x %d features", len(rows), len(CATALOG))
    return FeatureMatrix(np.vstack(rows), labels, CATALOG, provenance)
