import numpy as np
import pytest

from emotion.exceptions import ConfigurationError, LabelUndeterminable, MalformedLine, MixedLabels
from emotion.ingest import (
    EmotionLabel,
    Recording,
    label_from_name,
    load_recording,
    parse_line,
    synthesize_clock,
    write_recording,
)


# --- Fixtures ---
@pytest.fixture
def happy_rows():
    rows = []
    for i in range(27):
        second = 33 + i // 12
        left = 3.0 + 0.01 * i
        right = -1 if i == 5 else 2.9 + 0.01 * i
        rows.append(f"3/3/2023 6:09:{second:02d} AM,{left},{right}")
    return rows


def write_lines(path, lines, ending="\n"):
    path.write_text(ending.join(lines) + ending, encoding="latin-1")
    return path


# --- parse_line ---
def test_parse_line_with_label():
    parsed = parse_line("3/3/2023 6:09:33 AM,3.234989,2.993118, happy")
    assert parsed.wallclock == "3/3/2023 6:09:33 AM"
    assert parsed.left_mm == 3.234989
    assert parsed.right_mm == 2.993118
    assert parsed.label is EmotionLabel.HAPPY


def test_parse_line_passes_blink_sentinel_through():
    parsed = parse_line("3/3/2023 6:09:33 AM,-1,-1, fear")
    assert (parsed.left_mm, parsed.right_mm) == (-1.0, -1.0)
    assert parsed.label is EmotionLabel.FEAR


def test_parse_line_without_label():
    parsed = parse_line("3/3/2023 6:09:33 AM,3.1,3.0")
    assert parsed.label is None


def test_parse_line_wrong_field_count():
    with pytest.raises(MalformedLine) as exc:
        parse_line("3/3/2023 6:09:33 AM,3.0", line_no=7)
    assert exc.value.line_no == 7
    assert exc.value.field == "record"


@pytest.mark.parametrize("line, field", [
    ("3/3/2023 6:09:33 AM,abc,3.0", "left_mm"),
    ("3/3/2023 6:09:33 AM,3.0,3,0.1", "label"),
    ("3/3/2023 6:09:33 AM,3.0,nan", "right_mm"),
    ("3/3/2023 6:09:33 AM,3.0,3.1, surprise", "label"),
])
def test_parse_line_names_offending_field(line, field):
    with pytest.raises(MalformedLine) as exc:
        parse_line(line, line_no=1)
    assert exc.value.field == field


def test_emotion_label_canonical_order():
    assert [int(label) for label in EmotionLabel] == [0, 1, 2, 3]
    assert EmotionLabel.tokens() == ["happy", "sad", "anger", "fear"]


@pytest.mark.parametrize("name, expected", [
    ("session_happy.csv", EmotionLabel.HAPPY),
    ("P01-Anger-take2.csv", EmotionLabel.ANGER),
    ("recording.csv", None),
    ("happy_then_sad.csv", None),
])
def test_label_from_name(name, expected):
    assert label_from_name(name) == expected


# --- clock ---
def test_synthesized_clock_at_120_hz():
    assert synthesize_clock(4, 120.0).tolist() == [0, 8, 17, 25]


@pytest.mark.parametrize("rate", [30.0, 120.0, 250.0, 1000.0])
def test_synthesized_clock_strictly_increasing(rate):
    t = synthesize_clock(5000, rate)
    assert np.all(np.diff(t) > 0)


def test_synthesized_clock_rejects_rates_above_one_khz():
    with pytest.raises(ConfigurationError):
        synthesize_clock(10, 2000.0)


# --- load_recording ---
def test_load_recording_labels_from_file_name(tmp_path, happy_rows):
    path = write_lines(tmp_path / "session_happy.csv", happy_rows)
    rec = load_recording(path, 120.0)
    assert len(rec) == 27
    assert rec.label is EmotionLabel.HAPPY
    assert rec.t_ms[:4].tolist() == [0, 8, 17, 25]
    assert rec.right_mm[5] == -1.0
    assert rec.source_name == "session_happy.csv"


def test_load_recording_accepts_crlf_and_skips_blank_lines(tmp_path, happy_rows):
    path = write_lines(tmp_path / "session_happy.csv", happy_rows[:3] + [""] + happy_rows[3:], ending="\r\n")
    assert len(load_recording(path)) == 27


def test_load_recording_empty_file(tmp_path):
    path = tmp_path / "session_sad.csv"
    path.write_bytes(b"")
    rec = load_recording(path)
    assert len(rec) == 0
    assert rec.label is EmotionLabel.SAD


def test_load_recording_column_label_wins(tmp_path, happy_rows, caplog):
    path = write_lines(tmp_path / "session_happy.csv", [f"{row}, fear" for row in happy_rows])
    rec = load_recording(path)
    assert rec.label is EmotionLabel.FEAR
    assert "using the column" in caplog.text


def test_load_recording_mixed_labels(tmp_path, happy_rows):
    lines = [f"{row}, happy" for row in happy_rows[:10]] + [f"{row}, sad" for row in happy_rows[10:]]
    with pytest.raises(MixedLabels):
        load_recording(write_lines(tmp_path / "session_happy.csv", lines))


def test_load_recording_without_any_label(tmp_path, happy_rows):
    with pytest.raises(LabelUndeterminable):
        load_recording(write_lines(tmp_path / "recording.csv", happy_rows))


def test_load_recording_rejects_backwards_wallclock(tmp_path, happy_rows):
    lines = happy_rows[:20] + ["3/3/2023 6:09:01 AM,3.0,3.0"]
    with pytest.raises(MalformedLine) as exc:
        load_recording(write_lines(tmp_path / "session_happy.csv", lines))
    assert exc.value.line_no == 21
    assert exc.value.field == "wallclock"


def test_load_recording_reports_malformed_line_number(tmp_path, happy_rows):
    lines = happy_rows[:3] + ["3/3/2023 6:09:33 AM,3.0"] + happy_rows[3:]
    with pytest.raises(MalformedLine) as exc:
        load_recording(write_lines(tmp_path / "session_happy.csv", lines))
    assert exc.value.line_no == 4


def test_write_then_load_gives_identical_recording(tmp_path):
    rng = np.random.default_rng(3)
    n = 400
    left = np.round(rng.uniform(2.0, 5.0, n), 6)
    right = np.round(rng.uniform(2.0, 5.0, n), 6)
    left[[10, 11, 200]] = -1.0
    right[[10, 11, 300]] = -1.0
    rec = Recording(synthesize_clock(n, 120.0), left, right, EmotionLabel.ANGER, "session_anger.csv", 120.0)

    loaded = load_recording(write_recording(rec, tmp_path / rec.source_name), 120.0)

    assert loaded.label is rec.label
    assert loaded.t_ms.tolist() == rec.t_ms.tolist()
    assert loaded.left_mm.tolist() == rec.left_mm.tolist()
    assert loaded.right_mm.tolist() == rec.right_mm.tolist()


def test_written_rows_follow_the_tracker_shape(tmp_path):
    rec = Recording([0, 8], [3.234989, -1.0], [2.993118, -1.0], EmotionLabel.HAPPY, "session_happy.csv")
    text = write_recording(rec, tmp_path / "out.csv").read_text(encoding="latin-1")
    assert text.splitlines() == [
        "3/3/2023 6:00:00 AM,3.234989,2.993118, happy",
        "3/3/2023 6:00:00 AM,-1,-1, happy",
    ]
