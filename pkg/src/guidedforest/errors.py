"""Exception types raised across the package."""


class GuidedForestError(Exception):
    """Base class for all errors surfaced by this package."""


class ChildCountsMismatchError(GuidedForestError, ValueError):
    """Left and right child counts do not sum to the parent counts."""


class AllZeroImportanceError(GuidedForestError, ValueError):
    """Every raw importance score is zero; normalization is undefined."""


class GammaOutOfRangeError(GuidedForestError, ValueError):
    """Guidance strength gamma must lie in [0, 1]."""


class MtryExceedsFeaturesError(GuidedForestError, ValueError):
    """Requested per-node feature sample is larger than the feature count."""


class FeatureCountMismatchError(GuidedForestError, ValueError):
    """Row width does not match the feature count the model was trained on."""


class MissingWeightsError(GuidedForestError, ValueError):
    """A guided build mode was requested without regularization weights."""


class EmptySelectionError(GuidedForestError, ValueError):
    """Feature selection returned no features; refusing to train on nothing."""


class WeightLengthMismatchError(GuidedForestError, ValueError):
    """Per-feature weight vector length does not match the dataset."""


class WeightOutOfRangeError(GuidedForestError, ValueError):
    """A per-feature weight fell outside [0, 1]."""


class CsvParseError(GuidedForestError, ValueError):
    """A CSV cell failed to parse; carries 1-based row/column location."""

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        if row is not None and column is not None:
            message = f"{message} (row {row}, column {column})"
        elif row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)
        self.row = row
        self.column = column


class MissingValueError(CsvParseError):
    """An empty cell where a finite numeric value was required."""


class SingleClassError(GuidedForestError, ValueError):
    """The label column contains a single distinct class."""


class ClassTooSmallError(GuidedForestError, ValueError):
    """A class has too few rows to be split into train and test."""


class ModelFormatError(GuidedForestError, ValueError):
    """A serialized model file is malformed."""
