"""Shared exception types."""


class CovtriageError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CovtriageError):
    """A value violates a documented invariant. `field` names the offender."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class SchemaError(CovtriageError):
    """A file does not match its documented schema (CSV header, JSON layout)."""


class RegionLookupError(CovtriageError):
    """Unknown region code. Carries nearest known codes for the caller."""

    def __init__(self, code: str, suggestions: list[str]):
        self.code = code
        self.suggestions = suggestions
        hint = f" (nearest known: {', '.join(suggestions)})" if suggestions else ""
        super().__init__(f"unknown region code {code!r}{hint}")


class ModelFormatError(CovtriageError):
    """Model artifact cannot be parsed."""


class ModelVersionError(CovtriageError):
    """Model artifact has an unsupported version tag."""
