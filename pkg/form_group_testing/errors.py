"""Exceptions raised by the group testing toolkit.

All of them derive from GroupTestingError so callers (and the CLI) can catch the
toolkit's failures without catching programming errors.
"""
from typing import Optional


class GroupTestingError(Exception):
    """Base class for toolkit errors."""


class InputError(GroupTestingError, ValueError):
    """Invalid arguments, out of range indices, or a malformed file.

    :param line: The 1-based line number, for errors raised while parsing files.
    """

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NoSolutionError(GroupTestingError):
    """The exponent search has no feasible assignment."""


class ProtocolViolationError(GroupTestingError):
    """Test outcomes are inconsistent with any allowed defective set."""


class GuardExceededError(GroupTestingError):
    """A brute-force verifier refused an instance above the configured limits."""
