"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class FairCorpusError(Exception):
    """Base class for every error raised by the package."""


class ManifestError(FairCorpusError):
    pass


class ManifestSyntaxError(ManifestError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class SchemaError(ManifestError):
    def __init__(self, message: str, field: str | None = None, dataset_id: str | None = None):
        where = ", ".join(
            part for part in (f"dataset_id={dataset_id}" if dataset_id else "", f"field={field}" if field else "") if part
        )
        super().__init__(f"{message} [{where}]" if where else message)
        self.field = field
        self.dataset_id = dataset_id


class DuplicateIdError(ManifestError):
    pass


class NoSensitiveAttributesError(ManifestError):
    pass


class FetchError(FairCorpusError):
    pass


class ManualDownloadRequired(FetchError):
    pass


class ParseError(FairCorpusError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class UnknownHookError(FairCorpusError):
    pass


class TransformError(FairCorpusError):
    def __init__(self, message: str, stage: str | None = None):
        super().__init__(f"[{stage}] {message}" if stage else message)
        self.stage = stage


class DegenerateTargetError(TransformError):
    pass


class LearnError(FairCorpusError):
    pass


class SingleClassError(LearnError):
    pass


class InsufficientSupportError(FairCorpusError):
    pass


class SelectionError(FairCorpusError):
    pass
