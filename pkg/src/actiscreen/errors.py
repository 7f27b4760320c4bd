"""Exception types raised across the package.

Every error derives from :class:`ActiScreenError`; the CLI maps the three
top-level categories (config, input, stage) to exit codes.
"""


class ActiScreenError(Exception):
    """Base class for all package errors."""


# ingest -------------------------------------------------------------------


class IngestError(ActiScreenError, ValueError):
    """Malformed raw recording input.

    ``offset`` is the byte offset (binary input) where the problem was found,
    ``record`` the 1-based record number when it applies.
    """

    def __init__(self, message, offset=None, record=None):
        self.offset = offset
        self.record = record
        where = []
        if record is not None:
            where.append(f"record {record}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class BadMagic(IngestError):
    pass


class UnsupportedVersion(IngestError):
    pass


class TruncatedRecord(IngestError):
    pass


class TrailingData(IngestError):
    pass


class NonMonotonicTimestamps(IngestError):
    pass


class RangeExceeded(IngestError):
    pass


class MissingColumn(IngestError):
    pass


class UnparsableField(IngestError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)


# signal / sleep / bouts -----------------------------------------------------


class SignalError(ActiScreenError, ValueError):
    pass


class EmptyRecording(SignalError):
    pass


class NotEnoughStillData(SignalError):
    pass


class IllConditioned(SignalError):
    pass


class CutoffAboveNyquist(SignalError):
    pass


class InsufficientData(SignalError):
    pass


class NoOverlap(SignalError):
    pass


class EmptyWindow(SignalError):
    pass


# features -------------------------------------------------------------------


class FeatureError(ActiScreenError, ValueError):
    pass


class TooShortForSpectrum(FeatureError):
    pass


class TooShort(FeatureError):
    pass


class FewerThanThreeBouts(FeatureError):
    pass


# model ------------------------------------------------------------------------


class ModelError(ActiScreenError, ValueError):
    pass


class SingleMinoritySample(ModelError):
    pass


class DegenerateLabels(ModelError):
    pass


class EmptyTrainingSet(ModelError):
    pass


class UnknownFeatureKeys(ModelError):
    pass


class SingleClass(ModelError):
    pass


class BudgetTooSmall(ModelError):
    pass


class ModelVersionError(ModelError):
    pass


class NoNights(ModelError):
    pass


# evaluation ---------------------------------------------------------------------


class EvaluationError(ActiScreenError, ValueError):
    pass


class SingleClassAUROC(EvaluationError):
    pass


class ClassTooSmall(EvaluationError):
    pass


class InsufficientPatients(EvaluationError):
    pass


class SingleDataset(EvaluationError):
    pass


class EmptyValues(EvaluationError):
    pass


class KeyMismatch(EvaluationError):
    pass


class KExceedsRegistry(EvaluationError):
    pass


# cli ------------------------------------------------------------------------------


class ConfigInvalid(ActiScreenError):
    exit_code = 2


class InputMissing(ActiScreenError):
    exit_code = 3


class StageFailure(ActiScreenError):
    exit_code = 4

    def __init__(self, stage, inner):
        self.stage = stage
        self.inner = inner
        super().__init__(f"{stage}: {type(inner).__name__}: {inner}")
