"""
Maximum Relevance Minimum Redundancy feature ranking.

Greedy difference (MID) form over histogram mutual information:
step 1 takes argmax I(f; Y); every later step takes
argmax over unselected f of I(f; Y) - mean_{s in S} I(f; s).
Ties go to the lower catalog index.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, NamedTuple

import numpy as np
import pandas as pd

from .exceptions import InputFormatError, OutOfRange
from .features import FeatureMatrix

logger = logging.getLogger(__name__)

DEFAULT_K = 51
DEFAULT_BINS = 10
SELECTION_COLUMNS = ["rank", "feature", "relevance_bits", "redundancy_bits", "objective"]


class StepScore(NamedTuple):
    relevance_bits: float
    redundancy_bits: float
    objective: float


@dataclass(frozen=True)
class SelectionResult:
    selected: List[int]
    scores: List[StepScore]
    k: int
    n_bins: int
    names: List[str] = field(default_factory=list)

    @property
    def selected_names(self) -> List[str]:
        return [self.names[i] for i in self.selected]

    def to_csv(self, path) -> Path:
        path = Path(path)
        frame = pd.DataFrame(
            [(rank, self.names[i], *score) for rank, (i, score) in enumerate(zip(self.selected, self.scores), start=1)],
            columns=SELECTION_COLUMNS,
        )
        frame.to_csv(path, index=False, lineterminator="\n")
        return path


def read_selection(path) -> pd.DataFrame:
    frame = pd.read_csv(path, float_precision="round_trip")
    if list(frame.columns) != SELECTION_COLUMNS:
        raise InputFormatError(f"{path}: expected columns {', '.join(SELECTION_COLUMNS)}")
    return frame


def discretize(column, n_bins: int = DEFAULT_BINS) -> np.ndarray:
    """Equal-width bins over [min, max]; the max lands in the last bin, a constant column in bin 0."""
    if n_bins < 2:
        raise OutOfRange(f"n_bins must be >= 2, got {n_bins}")
    x = np.asarray(column, dtype=float)
    if len(x) == 0:
        return np.zeros(0, dtype=np.int64)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros(len(x), dtype=np.int64)
    bins = np.floor((x - lo) * n_bins / (hi - lo)).astype(np.int64)
    return np.clip(bins, 0, n_bins - 1)


def mutual_information(x, y) -> float:
    """Plug-in mutual information in bits between two integer-coded sequences."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if len(x) != len(y) or len(x) == 0:
        raise OutOfRange("mutual_information needs two non-empty sequences of equal length")
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    nx, ny = xi.max() + 1, yi.max() + 1
    joint = np.bincount(xi * ny + yi, minlength=nx * ny).reshape(nx, ny) / len(x)
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log2(joint[nz] / (px @ py)[nz])))
    return max(mi, 0.0)


def mrmr_select(fm: FeatureMatrix, k: int = DEFAULT_K, n_bins: int = DEFAULT_BINS) -> SelectionResult:
    width = len(fm.catalog)
    if len(fm) == 0:
        raise OutOfRange("cannot select features from an empty matrix")
    if not 1 <= k <= width:
        raise OutOfRange(f"k must lie in [1, {width}], got {k}")

    binned = [discretize(fm.rows[:, j], n_bins) for j in range(width)]
    relevance = np.array([mutual_information(col, fm.labels) for col in binned])
    redundancy_sum = np.zeros(width)
    available = np.ones(width, dtype=bool)

    selected, scores = [], []
    for step in range(k):
        redundancy = redundancy_sum / step if step else np.zeros(width)
        objective = np.where(available, relevance - redundancy, -np.inf)
        pick = int(np.argmax(objective))
        selected.append(pick)
        scores.append(StepScore(float(relevance[pick]), float(redundancy[pick]), float(objective[pick])))
        available[pick] = False
        logger.debug("mrmr step %d: %s objective %.4f", step + 1, fm.names[pick], objective[pick])
        if step + 1 < k:
            for j in np.flatnonzero(available):
                redundancy_sum[j] += mutual_information(binned[j], binned[pick])

    logger.info("mrmr selected %d of %d features", k, width)
    return SelectionResult(selected, scores, k, n_bins, list(fm.names))
