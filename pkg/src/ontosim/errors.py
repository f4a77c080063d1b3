"""Exception hierarchy shared by every module."""

from __future__ import annotations

from typing import Any


class OntosimError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(OntosimError, ValueError):
    pass


class OutcomeIndexError(OntosimError, IndexError):
    pass


class UndefinedUpdateError(OntosimError, ValueError):
    """State update requested on a branch that has zero probability."""


class UnknownLabelError(OntosimError, KeyError):
    pass


class UnsupportedOperationError(OntosimError, NotImplementedError):
    pass


class NotPsiOnticError(OntosimError, ValueError):
    """An ontic state is compatible with more than one quantum state."""


class UndecidableError(OntosimError, ValueError):
    """Overlap cannot be decided analytically for this model."""


class ContractViolationError(OntosimError, RuntimeError):
    """A model was asked to do something its own definition forbids."""


class UpdateImpossibleError(ContractViolationError):
    """The model admits no valid measurement-update rule.

    ``witness`` holds the record demonstrating why (may be ``None`` when the
    witness search itself is not applicable).
    """

    def __init__(self, message: str, witness: Any = None) -> None:
        super().__init__(message)
        self.witness = witness


class NegativityError(OntosimError, ValueError):
    """A quasi-probability took a negative value where a probability is needed."""

    def __init__(self, message: str, point: Any, value: float) -> None:
        super().__init__(message)
        self.point = point
        self.value = value


class ModelViolationError(OntosimError, RuntimeError):
    pass


class ResourceLimitError(OntosimError, MemoryError):
    """Requested enumeration exceeds the supported size."""


class ActionOrderError(OntosimError, ValueError):
    """An action sequence measures or transforms before any preparation."""
