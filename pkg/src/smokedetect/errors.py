"""Exception types shared across the package."""

from __future__ import annotations


class SmokedetectError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(SmokedetectError):
    """A value violates a domain-type invariant."""


class EmptyIntersection(SmokedetectError):
    """Box clipping produced a zero-area intersection; the region is unusable."""


class DecodeError(SmokedetectError):
    """An image file could not be decoded."""


class ParseError(SmokedetectError):
    """A fixture or manifest file is malformed."""

    def __init__(self, detail: str, *, line: int | None = None, path: str | None = None):
        self.detail = detail
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += str(path)
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {detail}" if where else detail)


class BackendFailure(SmokedetectError):
    """An inference backend failed; the pipeline degrades per-image and records it."""


class BackendConfigError(SmokedetectError):
    """A backend could not be constructed from the given configuration."""


class MissingTruth(SmokedetectError):
    """A pipeline result has no matching ground-truth entry."""


class UndefinedMetric(SmokedetectError):
    """The requested metric has a zero denominator for this confusion matrix."""


class UnknownLabel(SmokedetectError):
    """A manifest label string or folder name is not a recognized class."""
