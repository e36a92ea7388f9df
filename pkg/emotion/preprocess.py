# emotion/preprocess.py
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
import pandas as pd
from scipy import ndimage

from .exceptions import ImplausibleValue
from .ingest import BLINK_SENTINEL, EmotionLabel, PupilSample, Recording, _frozen

logger = logging.getLogger(__name__)

MAX_DIAMETER_MM = 8.0
CLEAN_COLUMNS = ["t_ms", "left_mm", "right_mm"]


@dataclass(frozen=True, eq=False)
class CleanSeries:
    t_ms: np.ndarray
    left_mm: np.ndarray
    right_mm: np.ndarray
    label: EmotionLabel
    sample_rate_hz: float
    dropped_count: int
    source_name: str

    def __post_init__(self):
        object.__setattr__(self, "t_ms", _frozen(self.t_ms, np.int64))
        object.__setattr__(self, "left_mm", _frozen(self.left_mm, np.float64))
        object.__setattr__(self, "right_mm", _frozen(self.right_mm, np.float64))
        object.__setattr__(self, "label", EmotionLabel(self.label))

    def __len__(self) -> int:
        return len(self.t_ms)

    @property
    def samples(self) -> Iterator[PupilSample]:
        for t, le, re_ in zip(self.t_ms.tolist(), self.left_mm.tolist(), self.right_mm.tolist()):
            yield PupilSample(t, le, re_)

    def report_line(self) -> str:
        return f"{self.source_name},{len(self)},{self.dropped_count}"


def remove_artifacts(rec, margin: int = 0) -> CleanSeries:
    """
    Drop every sample where either eye reads the blink sentinel.

    ``margin`` also drops that many samples on each side of a sentinel row.
    Accepts a Recording or a CleanSeries; on a CleanSeries it is a no-op
    apart from carrying its dropped count.
    """
    if margin < 0:
        raise ValueError("margin must be >= 0")
    left = np.asarray(rec.left_mm)
    right = np.asarray(rec.right_mm)

    blinked = (left == BLINK_SENTINEL) | (right == BLINK_SENTINEL)
    if margin and blinked.any():
        blinked = ndimage.binary_dilation(blinked, structure=np.ones(2 * margin + 1, dtype=bool))
    keep = ~blinked

    for eye, values in (("left_mm", left), ("right_mm", right)):
        kept = values[keep]
        bad = ~(np.isfinite(kept) & (kept > 0) & (kept <= MAX_DIAMETER_MM))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            t = int(np.asarray(rec.t_ms)[keep][i])
            raise ImplausibleValue(f"{rec.source_name}: {eye}={kept[i]!r} at t_ms={t} is outside (0, {MAX_DIAMETER_MM}]")

    dropped = int(blinked.sum()) + getattr(rec, "dropped_count", 0)
    series = CleanSeries(
        t_ms=np.asarray(rec.t_ms)[keep],
        left_mm=left[keep],
        right_mm=right[keep],
        label=rec.label,
        sample_rate_hz=rec.sample_rate_hz,
        dropped_count=dropped,
        source_name=rec.source_name,
    )
    logger.info("%s: kept %d, dropped %d", rec.source_name, len(series), dropped)
    return series


def write_clean_series(series: CleanSeries, path) -> Path:
    path = Path(path)
    frame = pd.DataFrame({"t_ms": series.t_ms, "left_mm": series.left_mm, "right_mm": series.right_mm})
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def read_clean_series(path, *, label, sample_rate_hz, dropped_count, source_name) -> CleanSeries:
    frame = pd.read_csv(path, dtype={"t_ms": "int64"}, float_precision="round_trip")
    return CleanSeries(
        t_ms=frame["t_ms"].to_numpy(),
        left_mm=frame["left_mm"].to_numpy(dtype=float),
        right_mm=frame["right_mm"].to_numpy(dtype=float),
        label=label,
        sample_rate_hz=sample_rate_hz,
        dropped_count=dropped_count,
        source_name=source_name,
    )
