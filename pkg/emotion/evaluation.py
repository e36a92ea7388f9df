# emotion/evaluation.py
import csv
import itertools
import logging
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import confusion_matrix as _tally

from .exceptions import EmptyMatrix, LengthMismatch, OutOfRange, TooFewRows
from .features import FeatureMatrix
from .gbm import GbmModel, Hyperparams, fit, select_stage
from .ingest import EmotionLabel

logger = logging.getLogger(__name__)

N_CLASSES = len(EmotionLabel)
METRIC_NAMES = ("accuracy", "specificity_macro", "recall_macro", "precision_macro", "f_score", "mcc")


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.7
    seed: int = 0
    stratified: bool = True


def split_indices(labels, cfg: SplitConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Seeded shuffle then split. Stratified mode shuffles within each class and
    gives each class its share of round(N * fraction) train rows by largest
    remainder (ties to the lower class id).
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if not 0 < cfg.train_fraction < 1:
        raise OutOfRange(f"train_fraction must lie in (0, 1), got {cfg.train_fraction}")
    if n < 2:
        raise TooFewRows(f"cannot split {n} rows")
    fraction = Fraction(cfg.train_fraction).limit_denominator(10 ** 6)
    n_train = int(round(n * fraction))
    rng = np.random.default_rng(cfg.seed)

    if not cfg.stratified:
        order = rng.permutation(n)
        train, test = order[:n_train], order[n_train:]
    else:
        classes = [c for c in range(N_CLASSES) if (labels == c).any()]
        members = {c: rng.permutation(np.flatnonzero(labels == c)) for c in classes}
        quotas = {c: len(members[c]) * fraction for c in classes}
        sizes = {c: int(quotas[c]) for c in classes}
        by_remainder = sorted(classes, key=lambda c: (-(quotas[c] - sizes[c]), c))
        for c in by_remainder[: n_train - sum(sizes.values())]:
            sizes[c] += 1
        train = np.concatenate([members[c][: sizes[c]] for c in classes])
        test = np.concatenate([members[c][sizes[c]:] for c in classes])

    if len(train) == 0 or len(test) == 0:
        raise TooFewRows(f"split of {n} rows at {cfg.train_fraction} leaves an empty side")
    return np.sort(train), np.sort(test)


def shuffle_split(fm: FeatureMatrix, cfg: SplitConfig) -> Tuple[FeatureMatrix, FeatureMatrix]:
    train, test = split_indices(fm.labels, cfg)
    return fm.take(train), fm.take(test)


def confusion_matrix(y_true, y_pred) -> np.ndarray:
    """Rows are true labels, columns predictions, both in canonical label order."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"{len(y_true)} true labels vs {len(y_pred)} predictions")
    if len(y_true) == 0:
        raise LengthMismatch("no labels to tally")
    for ids in (y_true, y_pred):
        if ids.min() < 0 or ids.max() >= N_CLASSES:
            raise OutOfRange(f"label ids must lie in 0..{N_CLASSES - 1}")
    return _tally(y_true, y_pred, labels=list(range(N_CLASSES)))


class ClassRates(NamedTuple):
    label: EmotionLabel
    precision: float
    recall: float
    specificity: float
    f1: float


@dataclass(frozen=True)
class EvaluationReport:
    confusion: np.ndarray
    accuracy: float
    specificity_macro: float
    recall_macro: float
    precision_macro: float
    f_score: float
    mcc: float
    per_class: Tuple[ClassRates, ...] = ()
    flags: Tuple[str, ...] = ()
    extras: Dict[str, float] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    def values(self) -> Dict[str, float]:
        out = {name: getattr(self, name) for name in METRIC_NAMES}
        out.update(self.extras)
        return out

    def with_extras(self, **extras) -> "EvaluationReport":
        return replace(self, extras={**self.extras, **extras})


def _rate(numerator, denominator, what, flags):
    if denominator == 0:
        flags.append(what)
        return 0.0
    return numerator / denominator


def metrics(cm) -> EvaluationReport:
    """
    One-vs-rest rates macro-averaged over the classes; F from macro P and R;
    multiclass MCC from the full matrix. Zero denominators give 0 and a flag.
    """
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total < 1:
        raise EmptyMatrix("confusion matrix holds no rows")

    flags = []
    per_class = []
    for k, label in enumerate(EmotionLabel):
        tp = cm[k, k]
        fn = cm[k, :].sum() - tp
        fp = cm[:, k].sum() - tp
        tn = total - tp - fn - fp
        precision = _rate(tp, tp + fp, f"precision[{label.token}]", flags)
        recall = _rate(tp, tp + fn, f"recall[{label.token}]", flags)
        specificity = _rate(tn, tn + fp, f"specificity[{label.token}]", flags)
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class.append(ClassRates(label, float(precision), float(recall), float(specificity), float(f1)))

    precision_macro = float(np.mean([c.precision for c in per_class]))
    recall_macro = float(np.mean([c.recall for c in per_class]))
    specificity_macro = float(np.mean([c.specificity for c in per_class]))
    if precision_macro + recall_macro:
        f_score = 2 * precision_macro * recall_macro / (precision_macro + recall_macro)
    else:
        flags.append("f_score")
        f_score = 0.0

    correct = int(np.trace(cm))
    predicted = cm.sum(axis=0)
    actual = cm.sum(axis=1)
    s = total
    numerator = correct * s - float(np.dot(predicted, actual))
    denominator = np.sqrt(float(s * s - np.dot(predicted, predicted)) * float(s * s - np.dot(actual, actual)))
    if denominator == 0:
        flags.append("mcc")
        mcc = 0.0
    else:
        mcc = numerator / denominator

    return EvaluationReport(
        confusion=cm,
        accuracy=correct / total,
        specificity_macro=specificity_macro,
        recall_macro=recall_macro,
        precision_macro=precision_macro,
        f_score=float(f_score),
        mcc=float(mcc),
        per_class=tuple(per_class),
        flags=tuple(flags),
    )


def evaluate_model(model: GbmModel, fm: FeatureMatrix) -> EvaluationReport:
    return metrics(confusion_matrix(fm.labels, model.predict(fm)))


def accuracy(model: GbmModel, fm: FeatureMatrix) -> float:
    return float(np.mean(model.predict(fm) == fm.labels))


# --- grid search ---

class GridCell(NamedTuple):
    params: Dict[str, object]
    best_stage: int
    score: float


@dataclass(frozen=True)
class GridSearchResult:
    best: Hyperparams
    best_stage: int
    table: List[GridCell]


def grid_cells(grid: Dict[str, Sequence]) -> List[Dict[str, object]]:
    """Cartesian product in declared key order, values in declared order."""
    if not grid:
        return [{}]
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def grid_search(train: FeatureMatrix, grid: Dict[str, Sequence], inner_cfg: SplitConfig,
                base: Hyperparams = Hyperparams(), rule: str = "mse",
                test: Optional[FeatureMatrix] = None, select_on_test: bool = False) -> GridSearchResult:
    """
    Score every grid cell by accuracy at its selected stage.

    Default: fit on an inner train split of ``train`` and select/score on the
    inner validation split. ``select_on_test`` fits on all of ``train`` and
    selects/scores on ``test``, which leaks the test set into model choice.
    """
    if select_on_test:
        if test is None:
            raise OutOfRange("test-set selection needs the test matrix")
        logger.warning("test-set selection: hyperparameters and stage count are chosen on the test set")
        fit_on, score_on = train, test
    else:
        fit_on, score_on = shuffle_split(train, inner_cfg)

    table = []
    for params in grid_cells(grid):
        hp = replace(base, **params).for_width(len(train.catalog))
        model = fit(fit_on, fit_on.labels, hp)
        stage = select_stage(model, score_on, score_on.labels, rule)
        score = float(np.mean(model.staged_predict(score_on)[stage - 1] == score_on.labels))
        table.append(GridCell(params, stage, score))
        logger.info("grid %s: stage %d, score %.4f", params, stage, score)

    best_index = max(range(len(table)), key=lambda i: (table[i].score, -i))
    best = table[best_index]
    return GridSearchResult(replace(base, **best.params).for_width(len(train.catalog)), best.best_stage, table)


def write_grid_table(result: GridSearchResult, path) -> Path:
    path = Path(path)
    keys = list(result.table[0].params) if result.table else []
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*keys, "best_stage", "score"])
        for cell in result.table:
            writer.writerow([*(repr(cell.params[k]) for k in keys), cell.best_stage, repr(cell.score)])
    return path


# --- report rendering ---

def write_report_csv(report: EvaluationReport, path) -> Path:
    """One row per metric, a blank line, then the labelled confusion block."""
    path = Path(path)
    tokens = EmotionLabel.tokens()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", "value"])
        for name, value in report.values().items():
            writer.writerow([name, repr(float(value))])
        writer.writerow([])
        writer.writerow(["true\\predicted", *tokens])
        for token, row in zip(tokens, report.confusion):
            writer.writerow([token, *(int(v) for v in row)])
    return path


def format_report(report: EvaluationReport) -> str:
    lines = [f"Evaluated rows: {report.total}", ""]
    width = max(len(n) for n in report.values())
    for name, value in report.values().items():
        lines.append(f"{name:<{width}} = {value:.6f}")
    lines += ["", "Per class:", f"{'label':<8}{'precision':>11}{'recall':>9}{'specificity':>13}{'f1':>8}"]
    for c in report.per_class:
        lines.append(f"{c.label.token:<8}{c.precision:>11.4f}{c.recall:>9.4f}{c.specificity:>13.4f}{c.f1:>8.4f}")
    lines += ["", "Confusion matrix (rows true, columns predicted):", " " * 8 + "".join(f"{t:>8}" for t in EmotionLabel.tokens())]
    for token, row in zip(EmotionLabel.tokens(), report.confusion):
        lines.append(f"{token:<8}" + "".join(f"{int(v):>8}" for v in row))
    if report.flags:
        lines += ["", "Zero-denominator rates reported as 0: " + ", ".join(report.flags)]
    return "\n".join(lines) + "\n"
