# emotion/config.py
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import numpy as np
from django.conf import settings

from .evaluation import SplitConfig
from .exceptions import ConfigurationError, MissingInput
from .features import WindowConfig
from .gbm import Hyperparams
from .serializers import RunConfigSerializer
from .synth import SynthConfig

logger = logging.getLogger(__name__)

# spawn keys for per-stage seeds; synthesis uses the root seed itself
SEED_STAGES = {"synth": 0, "split": 1, "inner_split": 2, "gbm": 3}


def derive_seed(root: int, stage: str) -> int:
    """Stage seed = SeedSequence(root, spawn_key=(stage id,)).generate_state(1)[0]."""
    if stage == "synth":
        return int(root)
    return int(np.random.SeedSequence(int(root), spawn_key=(SEED_STAGES[stage],)).generate_state(1)[0])


@dataclass(frozen=True)
class RunConfig:
    seed: int = 42
    workdir: Path = Path(".")
    raw_dir: str = "raw"
    clean_dir: str = "clean"
    synth: SynthConfig = field(default_factory=SynthConfig)
    blink_margin: int = 0
    window: WindowConfig = field(default_factory=WindowConfig)
    welch_seg_len: int = 256
    welch_overlap: float = 0.5
    mrmr_k: int = 51
    mrmr_bins: int = 10
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    grid: Dict[str, List] = field(default_factory=lambda: {"learning_rate": [0.05, 0.051], "max_depth": [3, 5]})
    split: SplitConfig = field(default_factory=SplitConfig)
    paper_faithful_selection: bool = False
    stage_select_rule: str = "mse"
    top_features: int = 30

    @property
    def sample_rate_hz(self) -> float:
        return self.synth.sample_rate_hz

    def path(self, *parts) -> Path:
        return Path(self.workdir).joinpath(*parts)

    @property
    def inner_split(self) -> SplitConfig:
        return replace(self.split, train_fraction=0.8, seed=derive_seed(self.seed, "inner_split"))

    @classmethod
    def from_values(cls, values: dict) -> "RunConfig":
        serializer = RunConfigSerializer(data=values)
        if not serializer.is_valid():
            problems = "; ".join(f"{key}: {' '.join(map(str, errs))}" for key, errs in serializer.errors.items())
            raise ConfigurationError(f"invalid configuration: {problems}")
        v = serializer.validated_data
        seed = v["seed"]
        gbm_seed = v["gbm_seed"] if v.get("gbm_seed") is not None else derive_seed(seed, "gbm")
        grid = {}
        if v["grid_learning_rate"]:
            grid["learning_rate"] = list(v["grid_learning_rate"])
        if v["grid_max_depth"]:
            grid["max_depth"] = list(v["grid_max_depth"])
        config = cls(
            seed=seed,
            workdir=Path(v["workdir"]),
            raw_dir=v["raw_dir"],
            clean_dir=v["clean_dir"],
            synth=SynthConfig(
                duration_s=v["duration_s"],
                sample_rate_hz=v["sample_rate_hz"],
                noise_sigma_mm=v["noise_sigma_mm"],
                drift_sigma_mm=v["drift_sigma_mm"],
                drift_tau_s=v["drift_tau_s"],
                blink_rate_per_min=v["blink_rate_per_min"],
                blink_duration_ms=(v["blink_min_ms"], v["blink_max_ms"]),
                one_eye_dropout_prob=v["one_eye_dropout_prob"],
                seed=derive_seed(seed, "synth"),
            ),
            blink_margin=v["blink_margin"],
            window=WindowConfig(v["window_s"], v["hop_s"], v["min_fill"]),
            welch_seg_len=v["welch_seg_len"],
            welch_overlap=v["welch_overlap"],
            mrmr_k=v["mrmr_k"],
            mrmr_bins=v["mrmr_bins"],
            hyperparams=Hyperparams(
                max_depth=v["max_depth"],
                learning_rate=v["learning_rate"],
                n_estimators=v["n_estimators"],
                max_features=v["max_features"],
                min_samples_split=v["min_samples_split"],
                min_samples_leaf=v["min_samples_leaf"],
                subsample=v["subsample"],
                seed=gbm_seed,
            ),
            grid=grid,
            split=SplitConfig(train_fraction=v["train_fraction"], seed=derive_seed(seed, "split"),
                              stratified=v["stratified"]),
            paper_faithful_selection=v["paper_faithful_selection"],
            stage_select_rule=v["stage_select_rule"],
            top_features=v["top_features"],
        )
        config.window.validate(config.sample_rate_hz, config.welch_seg_len)
        return config


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{line_no}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"{source}:{line_no}: empty key")
        values[key] = value
    return values


def parse_overrides(pairs: Iterable[str]) -> Dict[str, str]:
    values = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ConfigurationError(f"--set expects key=value, got {pair!r}")
        key, value = (part.strip() for part in pair.split("=", 1))
        values[key] = value
    return values


def load_run_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """
    Merge the config file (``path``, else settings.EMOTION_CONFIG_FILE) with
    command-line overrides, which win. Unknown keys are errors.
    """
    path = path or getattr(settings, "EMOTION_CONFIG_FILE", "") or None
    values = {}
    if path:
        config_path = Path(path)
        if not config_path.is_file():
            raise MissingInput(f"config file {config_path} not found")
        values.update(parse_config_text(config_path.read_text(encoding="utf-8"), str(config_path)))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})

    unknown = sorted(set(values) - set(RunConfigSerializer().fields))
    if unknown:
        raise ConfigurationError(f"unknown configuration keys: {', '.join(unknown)}")
    config = RunConfig.from_values(values)
    logger.debug("run config: %s", config)
    return config
