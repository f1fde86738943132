"""Exception types shared across the package."""

from __future__ import annotations


class AssortPlanError(Exception):
    """Base class for every error this package raises on purpose."""


class ParameterMismatchError(AssortPlanError):
    """Catalog, parameters, and assortment reference inconsistent product ids."""


class InvalidChoiceError(AssortPlanError, ValueError):
    """Choice index is neither in the offered assortment nor the no-purchase option."""


class InfeasibleConstraintsError(AssortPlanError):
    """The constraint set admits no feasible assortment (or references unknown ids)."""


class OracleSizeError(AssortPlanError):
    """Instance too large for exhaustive enumeration."""


class EmptyUniverseError(AssortPlanError):
    """No products left to optimize over."""


class EmptyDataError(AssortPlanError):
    """Estimation input contains no usable rows."""


class IdentifiabilityError(AssortPlanError):
    """Observations cannot identify the requested parameters."""


class IngestionError(AssortPlanError):
    """Input file violates its schema; carries the offending row numbers."""

    def __init__(self, message: str, rows: tuple[int, ...] = ()):
        super().__init__(message)
        self.rows = tuple(rows)


class UnknownDatasetError(AssortPlanError):
    def __init__(self, dataset_id: str, available: tuple[str, ...] = ()):
        self.dataset_id = dataset_id
        self.available = tuple(available)
        hint = f" Available datasets: {', '.join(self.available)}." if self.available else " No datasets ingested yet."
        super().__init__(f"unknown dataset '{dataset_id}'.{hint}")


class UnknownModelError(AssortPlanError):
    def __init__(self, dataset_id: str, model_id: str, available: tuple[str, ...] = ()):
        self.dataset_id = dataset_id
        self.model_id = model_id
        self.available = tuple(available)
        hint = f" Available models: {', '.join(self.available)}." if self.available else " No parameters stored for this dataset."
        super().__init__(f"unknown model '{model_id}' for dataset '{dataset_id}'.{hint}")


class ValidationError(AssortPlanError):
    """A request failed a range or consistency check.

    `code` is one of the stable machine-readable codes the orchestrator
    exposes (UNKNOWN_DATASET, CARDINALITY_RANGE, ...); `field` names the
    offending request slot.
    """

    def __init__(self, code: str, message: str, field: str | None = None):
        super().__init__(message)
        self.code = code
        self.field = field


class ProviderUnavailableError(AssortPlanError):
    """The language-model provider could not be reached (or failed)."""


class DecompositionError(AssortPlanError):
    """The provider produced a tool call that does not conform to the schema.

    `raw` keeps the provider output verbatim for logging.
    """

    def __init__(self, message: str, raw: object = None):
        super().__init__(message)
        self.raw = raw
