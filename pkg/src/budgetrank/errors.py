"""Exception types shared across the package."""


class BudgetRankError(Exception):
    """Base class for all package errors."""


class DuplicateDocumentError(BudgetRankError):
    """A corpus contained the same document id twice."""


class UnknownDocumentError(BudgetRankError):
    """A score was requested for a document id not present in the index."""


class FormatError(BudgetRankError):
    """A persisted artifact or input file could not be parsed."""


class TransportError(BudgetRankError):
    """An HTTP round-trip failed (network, status, or body)."""


class GenerationError(BudgetRankError):
    """A reformulation generator produced an unusable response."""


class TeacherError(BudgetRankError):
    """A teacher scoring call failed; the owning query is marked failed."""


class DuplicateObservationError(BudgetRankError):
    """A second teacher observation was submitted for the same document."""


class ConfigError(BudgetRankError):
    """An experiment configuration is invalid or incomplete."""
