"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class CycleWalkError(Exception):
    """Base class for all errors raised by ``ctqw_cycle``."""


class StructuralError(CycleWalkError, ValueError):
    """Input has the wrong shape, an index is out of range, or a value is not finite."""


class DomainError(CycleWalkError, ValueError):
    """A numeric argument lies outside the domain of the operation."""


class ExcludedModeError(DomainError):
    """The requested mode belongs to the zero set and carries no decay rate."""


class CapacityError(CycleWalkError, ValueError):
    """The requested problem size exceeds the configured dense-storage cap."""


class UnboundedError(DomainError):
    """The quantity does not exist for these parameters (e.g. no decoherence)."""


class ConsistencyError(CycleWalkError, ArithmeticError):
    """An internal numerical consistency check failed."""


class IntegrationDivergedError(ConsistencyError):
    """The integrated state no longer satisfies the density-matrix invariants."""
