"""Exception hierarchy.

``DataError`` covers bad inputs (schema, CSV, config, batches) and maps to
CLI exit code 2; ``CfRuntimeError`` covers failures during search, training
or generation and maps to exit code 3.
"""


class LlmcfError(Exception):
    pass


class DataError(LlmcfError, ValueError):
    pass


class CfRuntimeError(LlmcfError, RuntimeError):
    pass


# schema / config
class DuplicateName(DataError):
    pass


class MultipleTargets(DataError):
    pass


class NoTarget(DataError):
    pass


class UnknownKind(DataError):
    pass


class InvalidSchema(DataError):
    pass


# csv / instances
class MissingColumn(DataError):
    pass


class NonNumeric(DataError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class UnknownCategory(DataError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ArityMismatch(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class EmptyDataset(DataError):
    pass


# splitting
class FractionOutOfRange(DataError):
    pass


class TooFewInClass(DataError):
    pass


# models
class SingleClass(DataError):
    pass


class UnknownModelKind(DataError):
    pass


class ModelFormatError(DataError):
    pass


# metrics
class EmptyBatch(DataError):
    pass


class PredictionMismatch(CfRuntimeError):
    pass


class ImmutableViolation(CfRuntimeError):
    pass


# llm
class PlaceholderMissing(DataError):
    pass


class ResponseError(DataError):
    """Base for LLM responses that cannot be turned into an instance."""


class NoJsonObject(ResponseError):
    pass


class MissingFeature(ResponseError):
    def __init__(self, feature):
        super().__init__(f"response is missing feature {feature!r}")
        self.feature = feature


class ImmutableChanged(ResponseError):
    def __init__(self, feature):
        super().__init__(f"response altered immutable feature {feature!r}")
        self.feature = feature


class TransportError(CfRuntimeError):
    pass


# search baselines
class NoOppositeClass(CfRuntimeError):
    pass


class NoFlip(CfRuntimeError):
    pass


class BudgetExhausted(CfRuntimeError):
    pass


class InvalidTarget(CfRuntimeError):
    pass


# augmentation
class NotValidCf(DataError):
    pass
