"""Source spans and diagnostics shared by every compiler stage.

Error codes are grouped by stage: E1xxx lexical, E2xxx syntactic and
context checks, E3xxx typing, E4xxx dimensions, E5xxx run configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum


@dataclass(frozen=True, order=True)
class Span:
    line: int
    col: int
    length: int = 0
    offset: int = field(default=0, compare=False)

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NO_SPAN = Span(0, 0, 0, 0)


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    span: Span = NO_SPAN
    severity: Severity = Severity.ERROR

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def format(self, filename: str = "<input>") -> str:
        return f"{filename}:{self.span.line}:{self.span.col}: {self.severity.value} {self.code}: {self.message}"

    def to_json(self, filename: str = "<input>") -> str:
        return json.dumps(
            {
                "file": filename,
                "line": self.span.line,
                "col": self.span.col,
                "length": self.span.length,
                "code": self.code,
                "severity": self.severity.value,
                "message": self.message,
            },
            ensure_ascii=False,
        )


def sort_diagnostics(diags):
    return sorted(diags, key=lambda d: (d.span.line, d.span.col, d.code))


def has_errors(diags) -> bool:
    return any(d.is_error for d in diags)


class CompileError(Exception):
    """Base for errors that abort a stage and carry a single diagnostic."""

    code = "E0000"

    def __init__(self, message: str, span: Span = NO_SPAN, code: str | None = None):
        super().__init__(message)
        self.message = message
        self.span = span
        if code is not None:
            self.code = code

    def diagnostic(self) -> Diagnostic:
        return Diagnostic(self.code, self.message, self.span)

    def __str__(self) -> str:
        return f"{self.span}: {self.code}: {self.message}"
