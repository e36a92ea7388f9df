"""
Multinomial gradient boosting over regression trees, written from scratch.

Random streams: every draw comes from numpy's PCG64 seeded through
``SeedSequence(seed, spawn_key=...)``:
- stage ``m`` subsample:               spawn_key = (m,)
- node ``n`` of class ``k``'s tree, m:  spawn_key = (m, k, n)
Nodes are numbered heap-style (root 0, children 2n+1 and 2n+2), so the
draws do not depend on the order trees or nodes are grown in.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from .exceptions import ConfigurationError, ModelFormatError, OutOfRange, SingleClassInput, WidthMismatch
from .features import FeatureMatrix, catalog_fingerprint
from .ingest import EmotionLabel

logger = logging.getLogger(__name__)

N_CLASSES = len(EmotionLabel)
MODEL_FORMAT = "pupil-gbm"
MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Hyperparams:
    max_depth: int = 5
    learning_rate: float = 0.05
    n_estimators: int = 20
    max_features: int = 7
    min_samples_split: int = 200
    min_samples_leaf: int = 30
    subsample: float = 0.8
    seed: int = 10

    def validate(self, n_features: Optional[int] = None) -> None:
        problems = []
        if self.max_depth < 0:
            problems.append("max_depth must be >= 0")
        if not 0 <= self.learning_rate <= 1:
            problems.append("learning_rate must lie in [0, 1]")
        if self.n_estimators < 0:
            problems.append("n_estimators must be >= 0")
        if not 0 < self.subsample <= 1:
            problems.append("subsample must lie in (0, 1]")
        if self.min_samples_leaf < 1:
            problems.append("min_samples_leaf must be >= 1")
        if self.min_samples_split < 2 * self.min_samples_leaf:
            problems.append("min_samples_split must be >= 2 * min_samples_leaf")
        if self.max_features < 1 or (n_features is not None and self.max_features > n_features):
            problems.append(f"max_features must lie in [1, {n_features}]")
        if problems:
            raise ConfigurationError("; ".join(problems))

    def as_dict(self) -> dict:
        return asdict(self)

    def for_width(self, n_features: int) -> "Hyperparams":
        """Same settings with max_features capped at the available width."""
        return replace(self, max_features=min(self.max_features, n_features))


@dataclass(eq=False)
class TreeNode:
    """Internal when ``left``/``right`` are set (x[feature] <= threshold goes left), else a leaf."""

    feature_index: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    value: float = 0.0
    n_samples: int = 0
    improvement: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def leaves(self) -> Iterator["TreeNode"]:
        if self.is_leaf:
            yield self
        else:
            yield from self.left.leaves()
            yield from self.right.leaves()

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.empty(len(X))
        self._route(X, np.arange(len(X)), out)
        return out

    def _route(self, X, idx, out):
        if self.is_leaf:
            out[idx] = self.value
            return
        go_left = X[idx, self.feature_index] <= self.threshold
        self.left._route(X, idx[go_left], out)
        self.right._route(X, idx[~go_left], out)


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def newton_leaf_value(residuals, weights, n_classes: int = N_CLASSES) -> float:
    """Multinomial TreeBoost step: (K-1)/K * sum(r) / sum(|r|(1-|r|)); 0 on a zero denominator."""
    r = np.asarray(residuals, dtype=float)
    w = np.asarray(weights, dtype=float)
    numerator = np.sum(w * r)
    denominator = np.sum(w * np.abs(r) * (1.0 - np.abs(r)))
    if abs(denominator) < 1e-150:
        return 0.0
    return float((n_classes - 1) / n_classes * numerator / denominator)


def find_best_split(X, targets, weights, features, min_samples_leaf) -> Optional[Tuple[int, float, float]]:
    """
    Best (feature, threshold, improvement) under the Friedman criterion
    w_l*w_r/(w_l+w_r) * (mean_l - mean_r)**2, thresholds at midpoints of
    consecutive distinct values. Features are scanned in ascending index
    order, thresholds ascending; only a strictly larger improvement wins.
    """
    n = len(targets)
    best = None
    best_improvement = 0.0
    if n < 2:
        return best
    positions = np.arange(1, n)
    for f in sorted(int(f) for f in features):
        x = X[:, f]
        order = np.argsort(x, kind="stable")
        xs, ys, ws = x[order], targets[order], weights[order]

        w_left = np.cumsum(ws)[:-1]
        wy_left = np.cumsum(ws * ys)[:-1]
        w_total, wy_total = w_left[-1] + ws[-1], wy_left[-1] + ws[-1] * ys[-1]
        w_right = w_total - w_left

        legal = (xs[:-1] < xs[1:]) & (positions >= min_samples_leaf) & (n - positions >= min_samples_leaf)
        if not legal.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            diff = wy_left / w_left - (wy_total - wy_left) / w_right
            improvement = w_left * w_right / w_total * diff ** 2
        improvement = np.where(legal, improvement, -np.inf)
        i = int(np.argmax(improvement))
        if improvement[i] > best_improvement:
            threshold = (xs[i] + xs[i + 1]) / 2.0
            if not xs[i] <= threshold < xs[i + 1]:
                threshold = xs[i]
            best, best_improvement = (f, float(threshold), float(improvement[i])), float(improvement[i])
    return best


def fit_regression_tree(X, targets, hp: Hyperparams, streams: Callable[[int], np.random.Generator],
                        weights=None, leaf_value: Callable = newton_leaf_value) -> TreeNode:
    """
    Greedy top-down CART on ``targets``. ``streams(node_id)`` supplies the
    generator that draws the node's max_features candidate columns.
    """
    X = np.asarray(X, dtype=float)
    targets = np.asarray(targets, dtype=float)
    weights = np.ones(len(targets)) if weights is None else np.asarray(weights, dtype=float)
    width = X.shape[1]
    n_candidates = min(hp.max_features, width)

    def grow(rows, depth, node_id):
        y, w = targets[rows], weights[rows]
        leaf = TreeNode(value=leaf_value(y, w), n_samples=len(rows))
        if depth >= hp.max_depth or len(rows) < hp.min_samples_split or np.ptp(y) == 0:
            return leaf
        candidates = streams(node_id).choice(width, size=n_candidates, replace=False)
        split = find_best_split(X[rows], y, w, candidates, hp.min_samples_leaf)
        if split is None:
            return leaf
        feature, threshold, improvement = split
        go_left = X[rows, feature] <= threshold
        return TreeNode(
            feature_index=feature,
            threshold=threshold,
            left=grow(rows[go_left], depth + 1, 2 * node_id + 1),
            right=grow(rows[~go_left], depth + 1, 2 * node_id + 2),
            n_samples=len(rows),
            improvement=improvement,
        )

    return grow(np.arange(len(targets)), 0, 0)


def one_hot(y, n_classes: int = N_CLASSES) -> np.ndarray:
    return np.eye(n_classes)[np.asarray(y, dtype=np.int64)]


def multinomial_residuals(F, y) -> np.ndarray:
    """Negative gradient of the multinomial deviance: 1[y = k] - softmax(F)_k."""
    return one_hot(y, np.shape(F)[1]) - softmax(F, axis=1)


def row_deviance(F, y) -> np.ndarray:
    """-log softmax(F)_y per row."""
    F = np.asarray(F, dtype=float)
    return logsumexp(F, axis=1) - F[np.arange(len(F)), np.asarray(y, dtype=np.int64)]


def multinomial_deviance(F, y) -> float:
    return float(row_deviance(F, y).mean())


@dataclass(frozen=True, eq=False)
class GbmModel:
    priors: np.ndarray
    stages: tuple
    learning_rate: float
    feature_names: tuple
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    train_deviance: tuple = ()

    label_order = tuple(EmotionLabel)

    def __post_init__(self):
        priors = np.array(self.priors, dtype=float)
        priors.setflags(write=False)
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "stages", tuple(tuple(s) for s in self.stages))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "train_deviance", tuple(self.train_deviance))
        if any(len(stage) != N_CLASSES for stage in self.stages):
            raise ValueError(f"every stage needs exactly {N_CLASSES} trees")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def catalog_fingerprint(self) -> str:
        return catalog_fingerprint(self.feature_names)

    def _rows(self, X) -> np.ndarray:
        if isinstance(X, FeatureMatrix):
            if X.fingerprint != self.catalog_fingerprint:
                raise WidthMismatch(f"feature catalog {X.fingerprint} does not match the model's {self.catalog_fingerprint}")
            X = X.rows
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[np.newaxis, :]
        if X.shape[1] != self.n_features:
            raise WidthMismatch(f"input has {X.shape[1]} features, model expects {self.n_features}")
        return X

    def staged_decision_function(self, X) -> Iterator[np.ndarray]:
        X = self._rows(X)
        F = np.tile(self.priors, (len(X), 1))
        for stage in self.stages:
            for k, tree in enumerate(stage):
                F[:, k] += self.learning_rate * tree.predict(X)
            yield F.copy()

    def decision_function(self, X) -> np.ndarray:
        X = self._rows(X)
        F = np.tile(self.priors, (len(X), 1))
        for stage in self.stages:
            for k, tree in enumerate(stage):
                F[:, k] += self.learning_rate * tree.predict(X)
        return F

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X), axis=1)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def staged_predict_proba(self, X) -> Iterator[np.ndarray]:
        for F in self.staged_decision_function(X):
            yield softmax(F, axis=1)

    def staged_predict(self, X) -> np.ndarray:
        """Row m holds the predictions of stages 1..m+1."""
        X = self._rows(X)
        staged = [np.argmax(p, axis=1) for p in self.staged_predict_proba(X)]
        return np.array(staged, dtype=np.int64).reshape(len(self.stages), len(X))

    def truncate(self, n: int) -> "GbmModel":
        if not 1 <= n <= len(self.stages):
            raise OutOfRange(f"cannot truncate a {len(self.stages)}-stage model to {n} stages")
        return replace(self, stages=self.stages[:n], train_deviance=self.train_deviance[:n])


def fit(X, y, hp: Hyperparams = Hyperparams(), feature_names: Optional[Sequence[str]] = None) -> GbmModel:
    """
    Boost ``hp.n_estimators`` stages of K per-class trees on the multinomial
    deviance. Each stage shares one subsample of floor(subsample * N) rows
    across its K trees.
    """
    if isinstance(X, FeatureMatrix):
        feature_names = feature_names or X.names
        X = X.rows
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    n, width = X.shape
    feature_names = tuple(feature_names) if feature_names is not None else tuple(f"f{j}" for j in range(width))
    if len(feature_names) != width:
        raise WidthMismatch(f"{len(feature_names)} feature names for {width} columns")
    if len(y) != n:
        raise WidthMismatch(f"{n} rows but {len(y)} labels")
    hp.validate(width)
    if len(np.unique(y)) < 2:
        raise SingleClassInput(f"training labels hold a single class ({len(y)} rows)")

    counts = np.bincount(y, minlength=N_CLASSES)
    priors = np.log(np.maximum(counts / n, np.finfo(float).eps))
    F = np.tile(priors, (n, 1))
    n_sub = max(1, int(math.floor(hp.subsample * n)))

    stages, deviance = [], []
    for m in range(hp.n_estimators):
        residuals = multinomial_residuals(F, y)
        if n_sub < n:
            rows = np.sort(stream(hp.seed, m).choice(n, size=n_sub, replace=False))
        else:
            rows = np.arange(n)
        trees = tuple(
            fit_regression_tree(
                X[rows], residuals[rows, k], hp,
                streams=lambda node_id, k=k, m=m: stream(hp.seed, m, k, node_id),
            )
            for k in range(N_CLASSES)
        )
        # a root that cannot split leaves the scores at the priors
        trees = tuple(TreeNode(value=0.0, n_samples=t.n_samples) if t.is_leaf else t for t in trees)
        for k, tree in enumerate(trees):
            F[:, k] += hp.learning_rate * tree.predict(X)
        stages.append(trees)
        deviance.append(multinomial_deviance(F, y))
        logger.debug("stage %d: train deviance %.6f", m + 1, deviance[-1])

    return GbmModel(priors, stages, hp.learning_rate, feature_names, hp, deviance)


def stage_errors(staged, y_eval) -> np.ndarray:
    """Mean squared error between label integers, per stage."""
    staged = np.asarray(staged, dtype=float)
    y = np.asarray(y_eval, dtype=float)
    return ((staged - y) ** 2).mean(axis=1)


def select_best_stage(staged, y_eval) -> int:
    """1-based stage with the lowest label-integer MSE; the earliest wins ties."""
    staged = np.asarray(staged)
    if staged.ndim != 2 or len(staged) == 0:
        raise OutOfRange("need at least one stage of predictions")
    return int(np.argmin(stage_errors(staged, y_eval))) + 1


def select_best_stage_by_deviance(model: GbmModel, X, y_eval) -> int:
    """1-based stage with the lowest multinomial deviance on (X, y_eval); the earliest wins ties."""
    losses = [multinomial_deviance(F, y_eval) for F in model.staged_decision_function(X)]
    if not losses:
        raise OutOfRange("model has no stages")
    return int(np.argmin(losses)) + 1


def select_stage(model: GbmModel, X, y_eval, rule: str = "mse") -> int:
    if rule == "mse":
        return select_best_stage(model.staged_predict(X), y_eval)
    if rule == "deviance":
        return select_best_stage_by_deviance(model, X, y_eval)
    raise ConfigurationError(f"unknown stage selection rule {rule!r}")


# --- model document ---

def _node_record(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"value": node.value, "n": node.n_samples}
    return {
        "feature": node.feature_index,
        "threshold": node.threshold,
        "n": node.n_samples,
        "left": _node_record(node.left),
        "right": _node_record(node.right),
    }


def _node_from_record(record, n_features: int) -> TreeNode:
    try:
        if "value" in record:
            return TreeNode(value=float(record["value"]), n_samples=int(record.get("n", 0)))
        feature = int(record["feature"])
        if not 0 <= feature < n_features:
            raise ModelFormatError(f"split feature {feature} outside [0, {n_features})")
        return TreeNode(
            feature_index=feature,
            threshold=float(record["threshold"]),
            left=_node_from_record(record["left"], n_features),
            right=_node_from_record(record["right"], n_features),
            n_samples=int(record.get("n", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"bad tree node record: {exc}") from None


def model_to_document(model: GbmModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "label_order": [label.token for label in model.label_order],
        "catalog_fingerprint": model.catalog_fingerprint,
        "feature_names": list(model.feature_names),
        "hyperparams": model.hyperparams.as_dict(),
        "learning_rate": model.learning_rate,
        "priors": [float(p) for p in model.priors],
        "train_deviance": list(model.train_deviance),
        "stages": [[_node_record(tree) for tree in stage] for stage in model.stages],
    }


def model_from_document(document: dict) -> GbmModel:
    from .serializers import ModelDocumentSerializer

    header = ModelDocumentSerializer(data=document)
    if not header.is_valid():
        raise ModelFormatError(f"invalid model document: {dict(header.errors)}")
    data = header.validated_data
    names = data["feature_names"]
    if catalog_fingerprint(names) != data["catalog_fingerprint"]:
        raise ModelFormatError("catalog fingerprint does not match the feature names")
    stages = document.get("stages")
    if not isinstance(stages, list) or any(not isinstance(s, list) or len(s) != N_CLASSES for s in stages):
        raise ModelFormatError(f"stages must be a list of {N_CLASSES}-tree lists")
    return GbmModel(
        priors=data["priors"],
        stages=[[_node_from_record(tree, len(names)) for tree in stage] for stage in stages],
        learning_rate=data["learning_rate"],
        feature_names=names,
        hyperparams=Hyperparams(**data["hyperparams"]),
        train_deviance=data.get("train_deviance", []),
    )


def save_model(model: GbmModel, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(model_to_document(model), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def load_model(path) -> GbmModel:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            document = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a JSON document ({exc})") from None
    if not isinstance(document, dict):
        raise ModelFormatError(f"{path}: model document must be a JSON object")
    return model_from_document(document)
