"""Exception types shared across the library.

Plain ``ValueError`` is used for argument validation; the classes here mark
failure modes that callers may want to handle separately (budget overruns,
numeric underflow, unsatisfied structural preconditions).
"""


class TailLedgerError(Exception):
    """Base class for library-specific failures."""


class ResourceLimitError(TailLedgerError):
    """An exact enumeration would exceed its configured budget."""


class NumericDegeneracyError(TailLedgerError):
    """An expectation ratio underflowed to 0/0 and cannot be evaluated."""


class GapConditionError(TailLedgerError):
    """The no-middle-mass gap condition does not hold for the given prior."""


class SeparationFailureError(TailLedgerError):
    """A one-vs-rest split is not linearly separable by a homogeneous separator."""


class UnsupportedPriorError(TailLedgerError):
    """The requested computation has no closed form for this label prior."""
