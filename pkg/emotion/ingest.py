# emotion/ingest.py
import logging
import re
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import IntEnum
from pathlib import Path
from typing import Iterator, NamedTuple, Optional

import numpy as np

from .exceptions import (
    ConfigurationError,
    LabelUndeterminable,
    MalformedLine,
    MixedLabels,
)

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_RATE_HZ = 120.0
BLINK_SENTINEL = -1.0
WALLCLOCK_FORMAT = "%m/%d/%Y %I:%M:%S %p"
# start of the synthesized wall clock written by write_recording
WALLCLOCK_ORIGIN = datetime(2023, 3, 3, 6, 0, 0)

_DECIMAL = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")


class EmotionLabel(IntEnum):
    """The four base emotions; the integer value is the canonical encoding."""

    HAPPY = 0
    SAD = 1
    ANGER = 2
    FEAR = 3

    @property
    def token(self) -> str:
        return self.name.lower()

    @classmethod
    def from_token(cls, token: str) -> "EmotionLabel":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown emotion token {token!r}") from None

    @classmethod
    def tokens(cls) -> list:
        return [label.token for label in cls]


class PupilSample(NamedTuple):
    t_ms: int
    left_mm: float
    right_mm: float


class ParsedLine(NamedTuple):
    wallclock: str
    left_mm: float
    right_mm: float
    label: Optional[EmotionLabel]


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Recording:
    """
    A labeled, ordered pupil-diameter recording.
    Samples are held column-wise; ``samples`` yields them row by row.
    """

    t_ms: np.ndarray
    left_mm: np.ndarray
    right_mm: np.ndarray
    label: EmotionLabel
    source_name: str
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self):
        object.__setattr__(self, "t_ms", _frozen(self.t_ms, np.int64))
        object.__setattr__(self, "left_mm", _frozen(self.left_mm, np.float64))
        object.__setattr__(self, "right_mm", _frozen(self.right_mm, np.float64))
        object.__setattr__(self, "label", EmotionLabel(self.label))
        if not (len(self.t_ms) == len(self.left_mm) == len(self.right_mm)):
            raise ValueError("t_ms, left_mm and right_mm must have equal length")

    def __len__(self) -> int:
        return len(self.t_ms)

    @property
    def samples(self) -> Iterator[PupilSample]:
        for t, le, re_ in zip(self.t_ms.tolist(), self.left_mm.tolist(), self.right_mm.tolist()):
            yield PupilSample(t, le, re_)


def synthesize_clock(n: int, sample_rate_hz: float) -> np.ndarray:
    """t_ms[i] = round(i * 1000 / rate), halves rounded up."""
    if not 0 < sample_rate_hz <= 1000:
        raise ConfigurationError(f"sample_rate_hz must lie in (0, 1000], got {sample_rate_hz}")
    return np.floor(np.arange(n) * 1000.0 / sample_rate_hz + 0.5).astype(np.int64)


def _parse_decimal(text: str, line_no, field, source) -> float:
    value = text.strip()
    if not _DECIMAL.fullmatch(value):
        raise MalformedLine(line_no, field, f"not a decimal number: {text!r}", source)
    return float(value)


def parse_line(line: str, line_no: Optional[int] = None, source: Optional[str] = None) -> ParsedLine:
    """Parse one ``<wallclock>,<left>,<right>[, <label>]`` record."""
    fields = line.rstrip("\r\n").split(",")
    if len(fields) not in (3, 4):
        raise MalformedLine(line_no, "record", f"expected 3 or 4 fields, got {len(fields)}", source)

    wallclock = fields[0].strip()
    left = _parse_decimal(fields[1], line_no, "left_mm", source)
    right = _parse_decimal(fields[2], line_no, "right_mm", source)

    label = None
    if len(fields) == 4:
        try:
            label = EmotionLabel.from_token(fields[3])
        except ValueError:
            raise MalformedLine(line_no, "label", f"unknown emotion {fields[3].strip()!r}", source) from None
    return ParsedLine(wallclock, left, right, label)


def label_from_name(name: str) -> Optional[EmotionLabel]:
    """The single emotion token embedded in a file name, if there is exactly one."""
    tokens = {t for t in re.split(r"[^a-z]+", Path(name).stem.lower()) if t in EmotionLabel.tokens()}
    if len(tokens) != 1:
        return None
    return EmotionLabel.from_token(tokens.pop())


def _parse_wallclock(text: str, line_no, source) -> datetime:
    try:
        return datetime.strptime(text, WALLCLOCK_FORMAT)
    except ValueError:
        raise MalformedLine(line_no, "wallclock", f"unparseable timestamp {text!r}", source) from None


def load_recording(path, sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ) -> Recording:
    """
    Load one eye-tracking log.
    - Label: per-row label column wins over the file-name token.
    - Wall-clock text is validated as nondecreasing, then replaced by a
      uniform clock synthesized from the sample index.
    """
    path = Path(path)
    source = path.name
    with open(path, encoding="latin-1", newline="") as fh:
        lines = fh.read().splitlines()

    left, right, column_labels = [], [], set()
    previous, previous_text = None, None
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parsed = parse_line(line, line_no, source)
        # rows share a wall-clock second at 120 Hz
        if parsed.wallclock != previous_text:
            stamp = _parse_wallclock(parsed.wallclock, line_no, source)
            if previous is not None and stamp < previous:
                raise MalformedLine(line_no, "wallclock", "timestamps go backwards", source)
            previous, previous_text = stamp, parsed.wallclock
        left.append(parsed.left_mm)
        right.append(parsed.right_mm)
        if parsed.label is not None:
            column_labels.add(parsed.label)

    if len(column_labels) > 1:
        names = ", ".join(sorted(label.token for label in column_labels))
        raise MixedLabels(f"{source}: label column holds {names}")

    name_label = label_from_name(source)
    if column_labels:
        label = column_labels.pop()
        if name_label is not None and name_label != label:
            logger.warning("%s: label column says %s, file name says %s; using the column",
                           source, label.token, name_label.token)
    elif name_label is not None:
        label = name_label
    else:
        raise LabelUndeterminable(f"{source}: no emotion label in the label column or the file name")

    t_ms = synthesize_clock(len(left), sample_rate_hz)
    logger.debug("%s: %d samples, label %s", source, len(left), label.token)
    return Recording(t_ms, left, right, label, source, float(sample_rate_hz))


def format_diameter(value: float) -> str:
    if value == BLINK_SENTINEL:
        return "-1"
    return repr(float(value))


def format_wallclock(moment: datetime) -> str:
    hour = moment.hour % 12 or 12
    meridiem = "AM" if moment.hour < 12 else "PM"
    return f"{moment.month}/{moment.day}/{moment.year} {hour}:{moment.minute:02d}:{moment.second:02d} {meridiem}"


def write_recording(rec: Recording, path, origin: datetime = WALLCLOCK_ORIGIN) -> Path:
    """Write a recording back in the eye-tracker's row shape, one-second wall clock included."""
    path = Path(path)
    rows = []
    for sample in rec.samples:
        stamp = format_wallclock(origin + timedelta(seconds=sample.t_ms // 1000))
        rows.append(f"{stamp},{format_diameter(sample.left_mm)},{format_diameter(sample.right_mm)}, {rec.label.token}\n")
    with open(path, "w", encoding="latin-1", newline="") as fh:
        fh.writelines(rows)
    return path
