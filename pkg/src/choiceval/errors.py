"""Exception hierarchy shared across the package."""
from __future__ import annotations


class ChoicevalError(Exception):
    """Base class for all package errors."""


# --- task configuration ---

class TaskConfigError(ChoicevalError):
    pass


class MalformedYaml(TaskConfigError):
    pass


class MissingField(TaskConfigError):
    pass


class UnknownKey(TaskConfigError):
    pass


class BadTemplate(TaskConfigError):
    pass


class BadSampler(TaskConfigError):
    pass


class MalformedConfig(TaskConfigError):
    pass


# --- prompt rendering / assembly ---

class RenderError(ChoicevalError):
    pass


class MissingRecordField(RenderError):
    pass


class IndexOutOfBounds(RenderError):
    pass


class TypeMismatch(RenderError):
    pass


class MissingFilterColumn(ChoicevalError):
    pass


class TargetOutOfRange(ChoicevalError):
    pass


# --- dataset loading ---

class DatasetError(ChoicevalError):
    pass


class DatasetNotFound(DatasetError):
    pass


class DatasetParseError(DatasetError):
    def __init__(self, message: str, path: str = "", line: int = 0):
        super().__init__(message)
        self.path = path
        self.line = line


class DuplicateId(DatasetError):
    pass


# --- inference client ---

class EndpointError(ChoicevalError):
    pass


class Unreachable(EndpointError):
    pass


class Upstream4xx(EndpointError):
    def __init__(self, message: str, status_code: int = 400):
        super().__init__(message)
        self.status_code = status_code


class Upstream5xx(EndpointError):
    def __init__(self, message: str, status_code: int = 500):
        super().__init__(message)
        self.status_code = status_code


class NoLogprobs(EndpointError):
    pass


class StreamInterrupted(EndpointError):
    def __init__(self, message: str, partial: str = ""):
        super().__init__(message)
        self.partial = partial


# --- evaluation ---

class UndefinedAverage(ChoicevalError):
    pass


class AbortedRun(ChoicevalError):
    """Operator cancel. Carries the partial score of the interrupted task."""

    def __init__(self, message: str, partial_score=None):
        super().__init__(message)
        self.partial_score = partial_score


# --- run store ---

class StoreError(ChoicevalError):
    pass


class DuplicateRun(StoreError):
    pass


class UnknownRun(StoreError):
    pass


class RunNotRunning(StoreError):
    pass


class BadFilter(StoreError):
    pass


class StorageFailure(StoreError):
    pass
