import logging
from fractions import Fraction as Fr
from math import sqrt

import numpy as np
import pytest
from sklearn.metrics import matthews_corrcoef

from emotion.evaluation import (
    METRIC_NAMES,
    SplitConfig,
    confusion_matrix,
    format_report,
    grid_cells,
    grid_search,
    metrics,
    shuffle_split,
    split_indices,
    write_grid_table,
    write_report_csv,
)
from emotion.exceptions import EmptyMatrix, LengthMismatch, OutOfRange, TooFewRows
from emotion.features import FeatureMatrix, describe
from emotion.gbm import Hyperparams

REFERENCE_CM = [[8, 1, 1, 0], [0, 9, 1, 0], [1, 0, 9, 0], [0, 0, 2, 8]]


def by_hand(cm):
    """The six scalars straight from the one-vs-rest and multiclass MCC formulas."""
    cm = [list(map(int, row)) for row in cm]
    s = sum(map(sum, cm))
    rows = [sum(r) for r in cm]
    cols = [sum(cm[i][j] for i in range(4)) for j in range(4)]
    prec, rec, spec = [], [], []
    for k in range(4):
        tp = cm[k][k]
        fp, fn = cols[k] - tp, rows[k] - tp
        tn = s - tp - fp - fn
        prec.append(tp / (tp + fp) if tp + fp else 0.0)
        rec.append(tp / (tp + fn) if tp + fn else 0.0)
        spec.append(tn / (tn + fp) if tn + fp else 0.0)
    p, r = sum(prec) / 4, sum(rec) / 4
    c = sum(cm[k][k] for k in range(4))
    denom = sqrt((s * s - sum(x * x for x in cols)) * (s * s - sum(x * x for x in rows)))
    mcc = (c * s - sum(a * b for a, b in zip(cols, rows))) / denom if denom else 0.0
    return {
        "accuracy": c / s,
        "specificity_macro": sum(spec) / 4,
        "recall_macro": r,
        "precision_macro": p,
        "f_score": 2 * p * r / (p + r) if p + r else 0.0,
        "mcc": mcc,
    }


def expand(cm):
    y_true, y_pred = [], []
    for i, row in enumerate(cm):
        for j, count in enumerate(row):
            y_true += [i] * count
            y_pred += [j] * count
    return np.array(y_true), np.array(y_pred)


# --- Fixtures ---
@pytest.fixture
def blob_matrix():
    rng = np.random.default_rng(21)
    y = np.repeat(np.arange(4), 60)
    centers = np.array([[3.2, 3.1], [2.6, 2.5], [3.8, 3.7], [4.4, 4.3]])
    rows = centers[y] + rng.normal(0.0, 0.12, size=(240, 2))
    catalog = [describe("le_time_mean"), describe("re_time_mean")]
    return FeatureMatrix(rows, y, catalog, [("blob.csv", 2500 * i) for i in range(240)])


@pytest.fixture
def small_hp():
    return Hyperparams(max_features=2, min_samples_split=10, min_samples_leaf=2, n_estimators=10)


# --- metrics ---
def test_metrics_of_the_reference_matrix():
    report = metrics(REFERENCE_CM)
    assert report.accuracy == pytest.approx(0.85, abs=1e-12)
    assert report.recall_macro == pytest.approx(0.85, abs=1e-12)
    assert report.specificity_macro == pytest.approx(0.95, abs=1e-12)
    precision = float((Fr(8, 9) + Fr(9, 10) + Fr(9, 13) + 1) / 4)
    assert report.precision_macro == pytest.approx(precision, abs=1e-12)
    assert report.f_score == pytest.approx(2 * precision * 0.85 / (precision + 0.85), abs=1e-12)
    assert report.mcc == pytest.approx(960 / sqrt(1186 * 1200), abs=1e-12)
    assert report.flags == ()


@pytest.mark.parametrize("cm", [
    np.diag([10, 10, 10, 10]),
    np.full((4, 4), 5),
    REFERENCE_CM,
    [[20, 3, 0, 1], [2, 15, 4, 0], [0, 6, 11, 2], [1, 0, 3, 17]],
    [[5, 0, 0, 0], [5, 0, 0, 0], [0, 0, 5, 0], [0, 1, 0, 4]],
    [[3, 0, 0, 0], [3, 0, 0, 0], [3, 0, 0, 0], [3, 0, 0, 0]],
])
def test_metrics_match_hand_evaluation(cm):
    report = metrics(cm)
    for name, value in by_hand(cm).items():
        assert getattr(report, name) == pytest.approx(value, abs=1e-12), name
    assert report.total == int(np.sum(cm))


def test_perfect_and_chance_matrices():
    perfect = metrics(np.diag([10, 10, 10, 10]))
    assert [getattr(perfect, name) for name in METRIC_NAMES] == [1.0] * 6
    uniform = metrics(np.full((4, 4), 5))
    assert uniform.accuracy == 0.25
    assert uniform.mcc == pytest.approx(0.0, abs=1e-12)


def test_zero_denominators_are_flagged():
    report = metrics([[3, 0, 0, 0], [3, 0, 0, 0], [3, 0, 0, 0], [3, 0, 0, 0]])
    assert "precision[sad]" in report.flags
    assert "mcc" in report.flags
    assert report.mcc == 0.0
    missing_class = metrics([[5, 0, 0, 0], [0, 5, 0, 0], [0, 0, 5, 0], [0, 0, 0, 0]])
    assert "recall[fear]" in missing_class.flags
    assert missing_class.recall_macro == 0.75


@pytest.mark.parametrize("seed", range(5))
def test_mcc_agrees_with_sklearn(seed):
    rng = np.random.default_rng(seed)
    y_true = rng.integers(0, 4, 300)
    y_pred = np.where(rng.random(300) < 0.6, y_true, rng.integers(0, 4, 300))
    assert metrics(confusion_matrix(y_true, y_pred)).mcc == pytest.approx(matthews_corrcoef(y_true, y_pred), abs=1e-12)


def test_relabelling_permutes_the_matrix_and_keeps_the_scalars():
    y_true, y_pred = expand(REFERENCE_CM)
    perm = np.array([2, 0, 3, 1])
    original = metrics(confusion_matrix(y_true, y_pred))
    relabelled = metrics(confusion_matrix(perm[y_true], perm[y_pred]))
    inverse = np.argsort(perm)
    assert np.array_equal(relabelled.confusion[np.ix_(perm, perm)], original.confusion)
    assert np.array_equal(relabelled.confusion, original.confusion[np.ix_(inverse, inverse)])
    for name in METRIC_NAMES:
        assert getattr(relabelled, name) == pytest.approx(getattr(original, name), abs=1e-12)
    assert metrics(np.transpose(REFERENCE_CM)).mcc == pytest.approx(original.mcc, abs=1e-12)


def test_empty_matrix():
    with pytest.raises(EmptyMatrix):
        metrics(np.zeros((4, 4), dtype=int))


# --- confusion matrix ---
def test_confusion_matrix_examples():
    assert np.array_equal(confusion_matrix([0, 1, 2, 3], [0, 1, 2, 3]), np.eye(4, dtype=int))
    cm = confusion_matrix([0, 0, 1], [0, 1, 1])
    assert (cm[0, 0], cm[0, 1], cm[1, 1], cm.sum()) == (1, 1, 1, 3)


def test_confusion_matrix_margins():
    rng = np.random.default_rng(9)
    y_true, y_pred = rng.integers(0, 4, 1000), rng.integers(0, 4, 1000)
    cm = confusion_matrix(y_true, y_pred)
    assert cm.sum(axis=1).tolist() == np.bincount(y_true, minlength=4).tolist()
    assert cm.sum(axis=0).tolist() == np.bincount(y_pred, minlength=4).tolist()


def test_confusion_matrix_errors():
    with pytest.raises(LengthMismatch):
        confusion_matrix([0, 1], [0])
    with pytest.raises(LengthMismatch):
        confusion_matrix([], [])
    with pytest.raises(OutOfRange):
        confusion_matrix([0, 4], [0, 1])


# --- splitting ---
@pytest.mark.parametrize("stratified", [True, False])
def test_seventy_thirty(stratified):
    labels = np.repeat(np.arange(4), 25)
    train, test = split_indices(labels, SplitConfig(0.7, seed=3, stratified=stratified))
    assert (len(train), len(test)) == (70, 30)
    assert sorted(np.concatenate([train, test]).tolist()) == list(range(100))
    assert not set(train.tolist()) & set(test.tolist())


def test_stratified_largest_remainder():
    labels = np.array([0] * 4 + [1] * 3 + [2] * 2 + [3])
    train, test = split_indices(labels, SplitConfig(0.7, seed=0))
    assert np.bincount(labels[train], minlength=4).tolist() == [3, 2, 1, 1]
    assert np.bincount(labels[test], minlength=4).tolist() == [1, 1, 1, 0]


def test_split_is_seeded():
    labels = np.repeat(np.arange(4), 30)
    first = split_indices(labels, SplitConfig(seed=5))
    again = split_indices(labels, SplitConfig(seed=5))
    other = split_indices(labels, SplitConfig(seed=6))
    assert all(np.array_equal(a, b) for a, b in zip(first, again))
    assert not np.array_equal(first[0], other[0])


def test_split_rejects_tiny_or_lopsided_inputs():
    with pytest.raises(TooFewRows):
        split_indices([0], SplitConfig())
    with pytest.raises(TooFewRows):
        split_indices([0, 1], SplitConfig(0.1, stratified=False))
    with pytest.raises(OutOfRange):
        split_indices([0, 1, 2, 3], SplitConfig(1.0))


def test_shuffle_split_keeps_rows_with_their_labels(blob_matrix):
    train, test = shuffle_split(blob_matrix, SplitConfig(seed=1))
    assert len(train) + len(test) == len(blob_matrix)
    assert train.names == blob_matrix.names
    start = dict((t, i) for i, (_, t) in enumerate(blob_matrix.provenance))
    for part in (train, test):
        idx = [start[t] for _, t in part.provenance]
        assert np.array_equal(part.rows, blob_matrix.rows[idx])
        assert np.array_equal(part.labels, blob_matrix.labels[idx])


# --- grid search ---
def test_grid_cells_follow_declared_order():
    cells = grid_cells({"learning_rate": [0.05, 0.051], "max_depth": [3, 5]})
    assert cells == [
        {"learning_rate": 0.05, "max_depth": 3},
        {"learning_rate": 0.05, "max_depth": 5},
        {"learning_rate": 0.051, "max_depth": 3},
        {"learning_rate": 0.051, "max_depth": 5},
    ]
    assert grid_cells({}) == [{}]


def test_single_cell_grid(blob_matrix, small_hp):
    result = grid_search(blob_matrix, {"max_depth": [3]}, SplitConfig(0.8, seed=2), small_hp)
    assert len(result.table) == 1
    assert result.best.max_depth == 3
    assert 1 <= result.best_stage <= small_hp.n_estimators
    assert 0.0 <= result.table[0].score <= 1.0


def test_grid_search_is_deterministic(blob_matrix, small_hp, tmp_path):
    grid = {"learning_rate": [0.05], "max_depth": [3, 5]}
    first = grid_search(blob_matrix, grid, SplitConfig(0.8, seed=2), small_hp)
    second = grid_search(blob_matrix, grid, SplitConfig(0.8, seed=2), small_hp)
    assert len(first.table) == 2
    assert first == second
    lines = write_grid_table(first, tmp_path / "grid.csv").read_text().splitlines()
    assert lines[0] == "learning_rate,max_depth,best_stage,score"
    assert len(lines) == 3


def test_ties_go_to_the_first_cell(blob_matrix, small_hp):
    # identical cells score identically
    result = grid_search(blob_matrix, {"max_depth": [4, 4]}, SplitConfig(0.8, seed=2), small_hp)
    assert result.table[0].score == result.table[1].score
    assert result.best.max_depth == 4


def test_test_set_selection_warns_and_needs_the_test_matrix(blob_matrix, small_hp, caplog):
    train, test = shuffle_split(blob_matrix, SplitConfig(seed=1))
    with pytest.raises(OutOfRange):
        grid_search(train, {"max_depth": [3]}, SplitConfig(0.8), small_hp, select_on_test=True)
    with caplog.at_level(logging.WARNING, logger="emotion"):
        result = grid_search(train, {"max_depth": [3]}, SplitConfig(0.8), small_hp, test=test, select_on_test=True)
    assert "test set" in caplog.text
    assert len(result.table) == 1


# --- report files ---
def test_report_csv_layout(tmp_path):
    report = metrics(REFERENCE_CM).with_extras(train_accuracy=0.9, baseline_accuracy=0.7)
    lines = write_report_csv(report, tmp_path / "report.csv").read_text().splitlines()
    assert lines[0] == "metric,value"
    assert [line.split(",")[0] for line in lines[1:9]] == list(METRIC_NAMES) + ["train_accuracy", "baseline_accuracy"]
    assert lines[1] == "accuracy,0.85"
    assert lines[9] == ""
    assert lines[10] == "true\\predicted,happy,sad,anger,fear"
    assert lines[11] == "happy,8,1,1,0"
    assert len(lines) == 15


def test_text_report_lists_everything():
    text = format_report(metrics(REFERENCE_CM))
    for name in METRIC_NAMES:
        assert name in text
    assert "Per class:" in text
    assert "fear" in text
