"""Shared exception types."""

from __future__ import annotations


class SciflowError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SciflowError):
    """Invalid configuration value (thresholds, weights, provider settings)."""


class ContractViolation(SciflowError):
    """An input violated a documented value range contract."""


class DocumentParseError(SciflowError):
    """A document could not be parsed; carries a location when known."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class SchemaVersionError(DocumentParseError):
    """Document declares a schema version this toolkit does not understand."""
