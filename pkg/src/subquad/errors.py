"""Exception types shared across the package.

The CLI maps these onto exit codes: regime/feasibility problems exit 3,
oracle-cap problems exit 4.
"""


class SubquadError(Exception):
    """Base class for all package errors."""


class GrowthAssumptionViolated(SubquadError):
    """No thin sphere exists in the requested radius window."""


class OracleTooLarge(SubquadError):
    """An exact oracle would exceed its configured enumeration cap."""


class InfeasibleConditioning(SubquadError):
    """Every extension of a pinning has weight zero."""


class OutOfRegime(SubquadError):
    """Parameters fall outside the range where a bound is valid."""


class BudgetExhausted(SubquadError):
    """A lazy sampler ran out of its step budget."""


class SamplerStuck(SubquadError):
    """Repeated budget exhaustion beyond the retry cap."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InternalConsistencyError(SubquadError):
    """A numerical invariant that must hold analytically was violated."""
