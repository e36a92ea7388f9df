# emotion/pipeline.py
"""
Stage runners behind the management commands.

Every stage reads the previous stage's files from the work directory and
writes its own, so any stage can be re-run alone. The train/test split is
recomputed from features.csv and the split seed wherever it is needed.
"""
import json
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

from .config import RunConfig
from .evaluation import (
    EvaluationReport,
    GridSearchResult,
    accuracy,
    evaluate_model,
    format_report,
    grid_search,
    shuffle_split,
    write_grid_table,
    write_report_csv,
)
from .exceptions import InputFormatError, MissingInput, WorkdirLocked
from .features import FeatureMatrix, describe, extract
from .gbm import GbmModel, fit, load_model, save_model
from .ingest import EmotionLabel, load_recording
from .mrmr import mrmr_select, read_selection
from .preprocess import CleanSeries, read_clean_series, remove_artifacts, write_clean_series
from .serializers import CleanManifestEntrySerializer
from .synth import generate_dataset, write_dataset

logger = logging.getLogger(__name__)

LOCK_NAME = ".pipeline.lock"
MANIFEST_NAME = "manifest.json"
FEATURES_FILE = "features.csv"
SELECTION_FILE = "selection.csv"
MODEL_FILE = "model.json"
BASELINE_MODEL_FILE = "baseline_model.json"
GRID_FILE = "grid.csv"
REPORT_CSV = "report.csv"
REPORT_TXT = "report.txt"
TOP_FEATURES_FILE = "top_features.txt"

# the two raw inputs of the "no feature engineering" comparison
BASELINE_FEATURES = ("le_time_mean", "re_time_mean")


@contextmanager
def workdir_lock(workdir):
    """Hold ``<workdir>/.pipeline.lock`` for the duration of the block."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    lock = workdir / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise WorkdirLocked(f"{lock} exists; another run is using {workdir}") from None
    try:
        os.write(fd, f"{os.getpid()}\n".encode())
        os.close(fd)
        yield lock
    finally:
        lock.unlink(missing_ok=True)


def _require(path: Path, produced_by: str) -> Path:
    if not path.is_file():
        raise MissingInput(f"{path} not found; run '{produced_by}' first")
    return path


# --- stages ---

def run_synth(cfg: RunConfig) -> List[Path]:
    recordings = generate_dataset(cfg.synth)
    paths = write_dataset(recordings, cfg.path(cfg.raw_dir))
    logger.info("wrote %d synthetic sessions to %s", len(paths), cfg.path(cfg.raw_dir))
    return paths


def run_preprocess(cfg: RunConfig) -> List[CleanSeries]:
    raw_dir = cfg.path(cfg.raw_dir)
    sources = sorted(raw_dir.glob("*.csv")) if raw_dir.is_dir() else []
    if not sources:
        raise MissingInput(f"no raw recordings (*.csv) in {raw_dir}")
    clean_dir = cfg.path(cfg.clean_dir)
    clean_dir.mkdir(parents=True, exist_ok=True)

    cleaned, manifest = [], []
    for source in sources:
        series = remove_artifacts(load_recording(source, cfg.sample_rate_hz), cfg.blink_margin)
        target = write_clean_series(series, clean_dir / f"{source.stem}.csv")
        cleaned.append(series)
        manifest.append({
            "source_name": series.source_name,
            "file": target.name,
            "label": series.label.token,
            "sample_rate_hz": series.sample_rate_hz,
            "kept": len(series),
            "dropped": series.dropped_count,
        })
    with open(clean_dir / MANIFEST_NAME, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return cleaned


def load_clean_series(cfg: RunConfig) -> List[CleanSeries]:
    clean_dir = cfg.path(cfg.clean_dir)
    manifest_path = _require(clean_dir / MANIFEST_NAME, "preprocess")
    try:
        entries = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{manifest_path}: {exc}") from None
    serializer = CleanManifestEntrySerializer(data=entries, many=True)
    if not serializer.is_valid():
        raise InputFormatError(f"{manifest_path}: {serializer.errors}")

    series = []
    for entry in serializer.validated_data:
        path = _require(clean_dir / entry["file"], "preprocess")
        item = read_clean_series(
            path,
            label=EmotionLabel.from_token(entry["label"]),
            sample_rate_hz=entry["sample_rate_hz"],
            dropped_count=entry["dropped"],
            source_name=entry["source_name"],
        )
        if len(item) != entry["kept"]:
            raise InputFormatError(f"{path}: {len(item)} rows, manifest says {entry['kept']}")
        series.append(item)
    return series


def run_featurize(cfg: RunConfig) -> FeatureMatrix:
    fm = extract(load_clean_series(cfg), cfg.window, cfg.welch_seg_len, cfg.welch_overlap)
    fm.to_csv(cfg.path(FEATURES_FILE))
    return fm


def load_features(cfg: RunConfig) -> FeatureMatrix:
    return FeatureMatrix.from_csv(_require(cfg.path(FEATURES_FILE), "featurize"))


def run_select(cfg: RunConfig):
    train, _ = shuffle_split(load_features(cfg), cfg.split)
    result = mrmr_select(train, cfg.mrmr_k, cfg.mrmr_bins)
    result.to_csv(cfg.path(SELECTION_FILE))
    return result


def selected_features(cfg: RunConfig) -> List[str]:
    return [str(name) for name in read_selection(_require(cfg.path(SELECTION_FILE), "select"))["feature"]]


@dataclass(frozen=True)
class TrainSummary:
    model: GbmModel
    search: GridSearchResult
    baseline: GbmModel


def _fit_selected(train: FeatureMatrix, test: FeatureMatrix, cfg: RunConfig):
    search = grid_search(
        train, cfg.grid, cfg.inner_split, cfg.hyperparams, cfg.stage_select_rule,
        test=test, select_on_test=cfg.paper_faithful_selection,
    )
    model = fit(train, train.labels, search.best).truncate(search.best_stage)
    return model, search


def run_train(cfg: RunConfig) -> TrainSummary:
    names = selected_features(cfg)
    train, test = shuffle_split(load_features(cfg), cfg.split)

    model, search = _fit_selected(train.select(names), test.select(names), cfg)
    save_model(model, cfg.path(MODEL_FILE))
    write_grid_table(search, cfg.path(GRID_FILE))
    logger.info("model: %s, %d stages", search.best, len(model.stages))

    baseline, _ = _fit_selected(train.select(BASELINE_FEATURES), test.select(BASELINE_FEATURES), cfg)
    save_model(baseline, cfg.path(BASELINE_MODEL_FILE))
    return TrainSummary(model, search, baseline)


def run_evaluate(cfg: RunConfig) -> EvaluationReport:
    model = load_model(_require(cfg.path(MODEL_FILE), "train"))
    train, test = shuffle_split(load_features(cfg), cfg.split)

    names = list(model.feature_names)
    report = evaluate_model(model, test.select(names))
    report = report.with_extras(train_accuracy=accuracy(model, train.select(names)))

    baseline_path = cfg.path(BASELINE_MODEL_FILE)
    if baseline_path.is_file():
        baseline = load_model(baseline_path)
        report = report.with_extras(baseline_accuracy=accuracy(baseline, test.select(list(baseline.feature_names))))
    else:
        logger.warning("%s missing; report carries no baseline accuracy", baseline_path)

    write_report_csv(report, cfg.path(REPORT_CSV))
    cfg.path(REPORT_TXT).write_text(format_report(report), encoding="utf-8")
    return report


def format_top_features(names: List[str], top: int) -> str:
    """Top-N ranking plus left/right/cross counts among the top N and among all selected."""
    shown = names[:top]
    eyes = [describe(n).eye for n in names]
    lines = [f"Top {len(shown)} of {len(names)} selected features:"]
    lines += [f"{rank:>3}  {name}" for rank, name in enumerate(shown, start=1)]
    lines.append("")
    for scope, subset in ((f"top {len(shown)}", eyes[: len(shown)]), ("all selected", eyes)):
        counts = ", ".join(f"{eye} {subset.count(eye)}" for eye in ("LE", "RE", "cross"))
        lines.append(f"{scope}: {counts}")
    first_re = next((rank for rank, eye in enumerate(eyes, start=1) if eye == "RE"), None)
    lines.append(f"first right-eye feature at rank: {first_re if first_re is not None else 'none'}")
    return "\n".join(lines) + "\n"


def run_report_features(cfg: RunConfig, top: Optional[int] = None) -> str:
    text = format_top_features(selected_features(cfg), top or cfg.top_features)
    cfg.path(TOP_FEATURES_FILE).write_text(text, encoding="utf-8")
    return text


def run_all(cfg: RunConfig):
    run_synth(cfg)
    run_preprocess(cfg)
    run_featurize(cfg)
    run_select(cfg)
    run_train(cfg)
    return run_evaluate(cfg), run_report_features(cfg)
