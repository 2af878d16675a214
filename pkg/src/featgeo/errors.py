"""Exception hierarchy shared across the package."""


class FeatGeoError(Exception):
    """Base class for all package errors."""


class ValidationError(FeatGeoError):
    """Invalid input, configuration, or domain-object state."""


class EngineError(FeatGeoError):
    """A generative-engine call failed or returned unusable output after retries.

    Carries the last raw reply (if any) so callers can log what the engine said.
    """

    def __init__(self, message: str, raw_reply: str | None = None):
        super().__init__(message)
        self.raw_reply = raw_reply


class IntegrityError(FeatGeoError):
    """Internal bookkeeping disagrees with recomputed ground truth (ledger, records)."""


class BudgetError(FeatGeoError):
    """An enumeration or evaluation budget would be exceeded."""
