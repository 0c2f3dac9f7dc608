"""Domain errors shared across the package.

Every error exposes a stable machine-readable ``code`` (its class name) plus a
``context`` dict with structured details, so the CLI and the HTTP service can
report failures uniformly without string-matching messages.
"""

from __future__ import annotations

from typing import Any


class RiskweaveError(Exception):
    """Base class for all domain errors raised by this package."""

    def __init__(self, detail: str = "", **context: Any):
        super().__init__(detail or type(self).__name__)
        self.detail = detail
        self.context = context

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_payload(self) -> dict:
        return {"error": self.code, "detail": self.detail, "context": self.context}


# --- tabular ---------------------------------------------------------------

class EmptyFile(RiskweaveError):
    pass


class UnknownColumn(RiskweaveError):
    pass


class MissingColumn(RiskweaveError):
    pass


class ValueOutOfDomain(RiskweaveError):
    pass


class TargetNotBinary(RiskweaveError):
    pass


class FractionOutOfRange(RiskweaveError):
    pass


class NTooSmall(RiskweaveError):
    pass


class BadSchemaFile(RiskweaveError):
    pass


# --- cart ------------------------------------------------------------------

class EmptyCounts(RiskweaveError):
    pass


class EmptyDataset(RiskweaveError):
    pass


class InvalidDf(RiskweaveError):
    pass


class SchemaMismatch(RiskweaveError):
    pass


class BadModelFile(RiskweaveError):
    pass


# --- metrics ---------------------------------------------------------------

class UndefinedMetric(RiskweaveError):
    pass


class EmptyInput(RiskweaveError):
    pass


class ScoreOutOfRange(RiskweaveError):
    pass


# --- verbal ----------------------------------------------------------------

class InvalidMap(RiskweaveError):
    pass


class InvalidBase(RiskweaveError):
    pass


# --- narrate ---------------------------------------------------------------

class MissingTemplate(RiskweaveError):
    pass


class InvalidTemplate(RiskweaveError):
    pass


class UnknownLabel(RiskweaveError):
    pass


# --- cycles ----------------------------------------------------------------

class CycleOutOfRange(RiskweaveError):
    pass


class NoData(RiskweaveError):
    pass


class NotConverged(RiskweaveError):
    pass


class NoComparablePairs(RiskweaveError):
    pass


# --- service ---------------------------------------------------------------

class UnknownModel(RiskweaveError):
    pass


class WrongModelKind(RiskweaveError):
    pass
