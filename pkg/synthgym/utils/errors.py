"""Exceptions raised by synthgym."""

from typing import List, Optional


class SynthGymError(Exception):
    """Base class for all synthgym errors."""


class SchemaError(SynthGymError, ValueError):
    """A dataset schema violates one or more invariants."""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class PanelError(SynthGymError, ValueError):
    """A panel or its CSV rendering is malformed."""


class TransformError(SynthGymError, ValueError):
    """A transform cannot be fitted or applied to the given values."""


class NonFiniteLossError(SynthGymError, ArithmeticError):
    """A training loss evaluated to NaN or infinity."""

    def __init__(self, term: str, value: float):
        self.term = term
        self.value = value
        super().__init__(f"non-finite loss term '{term}': {value}")


class TrainingDivergedError(SynthGymError, RuntimeError):
    """Training losses stayed above the divergence limit."""


class CheckpointMismatchError(SynthGymError, ValueError):
    """A checkpoint and a transforms file were built for different schemas."""


class EmptyDatasetError(SynthGymError, ValueError):
    """An operation received a dataset with no records."""

    def __init__(self, what: str, detail: Optional[str] = None):
        message = f"empty {what}"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)
