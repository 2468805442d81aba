"""Error type shared by every evolvekit operation."""

from __future__ import annotations

from typing import Any


class EvolveError(Exception):
    """An operation failed with a stable machine-readable ``code``.

    ``details`` carries structured context (offending ids, an attached
    conformance report, ...) for callers that want more than the message.
    """

    def __init__(self, code: str, message: str, *, line: int | None = None,
                 column: int | None = None, details: Any = None):
        self.code = code
        self.message = message
        self.line = line
        self.column = column
        self.details = details
        loc = f" at {line}:{column}" if line is not None else ""
        super().__init__(f"{code}{loc}: {message}")


def parse_error(message: str, line: int | None = None, column: int | None = None) -> EvolveError:
    return EvolveError("PARSE_ERROR", message, line=line, column=column)
