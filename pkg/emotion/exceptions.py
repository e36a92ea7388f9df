"""
Error hierarchy for the pupillometry pipeline.

Shaped like DRF's ``APIException``: each class carries a ``default_detail`` and
a ``default_code``, and an ``exit_code`` takes the place of the HTTP status so
management commands can turn any of them into a category-coded exit.
"""


class PipelineError(Exception):
    exit_code = 1
    default_detail = "Pipeline error."
    default_code = "error"

    def __init__(self, detail=None, code=None):
        self.detail = detail if detail is not None else self.default_detail
        self.code = code or self.default_code
        super().__init__(self.detail)

    def __str__(self):
        return str(self.detail)


# --- configuration / environment ---
class ConfigurationError(PipelineError):
    exit_code = 2
    default_detail = "Invalid configuration."
    default_code = "config"


class MissingInput(PipelineError):
    exit_code = 3
    default_detail = "A required input file is missing."
    default_code = "missing_input"


class WorkdirLocked(PipelineError):
    exit_code = 6
    default_detail = "Another run holds the lock on this working directory."
    default_code = "locked"


# --- malformed inputs ---
class InputFormatError(PipelineError):
    exit_code = 4
    default_detail = "Input is not in the expected format."
    default_code = "input_format"


class MalformedLine(InputFormatError):
    default_code = "malformed_line"

    def __init__(self, line_no, field, reason, source=None):
        self.line_no = line_no
        self.field = field
        self.reason = reason
        where = f"{source}:" if source else "line "
        super().__init__(f"{where}{line_no}: field '{field}': {reason}")


class LabelUndeterminable(InputFormatError):
    default_detail = "No emotion label in the label column or the file name."
    default_code = "label_undeterminable"


class MixedLabels(InputFormatError):
    default_detail = "The label column holds more than one emotion."
    default_code = "mixed_labels"


class ImplausibleValue(InputFormatError):
    default_detail = "Pupil diameter outside (0, 8] mm."
    default_code = "implausible_value"


class ModelFormatError(InputFormatError):
    default_detail = "Model document is invalid."
    default_code = "model_format"


# --- data that cannot be processed ---
class DataError(PipelineError):
    exit_code = 5
    default_detail = "Data cannot be processed."
    default_code = "data"


class DegenerateWindow(DataError):
    default_detail = "Window has zero variance."
    default_code = "degenerate_window"


class TooShort(DataError):
    default_detail = "Series is too short."
    default_code = "too_short"


class EmptyOutput(DataError):
    default_detail = "No window survived feature extraction."
    default_code = "empty_output"


class TooFewRows(DataError):
    default_detail = "Too few rows to split."
    default_code = "too_few_rows"


class SingleClassInput(DataError):
    default_detail = "Training labels contain a single class."
    default_code = "single_class"


class WidthMismatch(DataError):
    default_detail = "Input width does not match the model's feature catalog."
    default_code = "width_mismatch"


class OutOfRange(DataError):
    default_detail = "Value out of range."
    default_code = "out_of_range"


class LengthMismatch(DataError):
    default_detail = "Sequences differ in length."
    default_code = "length_mismatch"


class EmptyMatrix(DataError):
    default_detail = "Confusion matrix is empty."
    default_code = "empty_matrix"


EXIT_CODES = {
    0: "success",
    1: "unexpected error",
    ConfigurationError.exit_code: "configuration error",
    MissingInput.exit_code: "missing input",
    InputFormatError.exit_code: "malformed input",
    DataError.exit_code: "unprocessable data",
    WorkdirLocked.exit_code: "working directory locked",
}
