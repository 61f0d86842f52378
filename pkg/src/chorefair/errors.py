"""Exception hierarchy.

Every error raised by the library derives from :class:`ChoreFairError`.  The
three intermediate classes map onto CLI exit codes: precondition failures
(2), exhausted budgets (3) and invariant violations (4).
"""


class ChoreFairError(Exception):
    """Base class for all library errors."""


class PreconditionViolated(ChoreFairError):
    """An input does not meet the documented precondition of an operation."""


class BudgetExceeded(ChoreFairError):
    """A configurable work budget ran out before an answer was found."""


class InvariantViolation(ChoreFairError):
    """An internal guarantee failed. Always a bug, never an input problem."""


# instance validation and parsing
class NonPositiveDisutility(PreconditionViolated):
    pass


class DimensionMismatch(PreconditionViolated):
    pass


class NotBivalued(PreconditionViolated):
    pass


class SingleValued(PreconditionViolated):
    pass


class ParseError(PreconditionViolated):
    pass


class SchemaVersionMismatch(ParseError):
    pass


# algorithm preconditions
class InfeasibleEarning(PreconditionViolated):
    pass


class NotAnEquilibrium(PreconditionViolated):
    pass


class NotGoodSolution(InvariantViolation):
    pass


class TooManyAgents(PreconditionViolated):
    pass


class TooManyChores(PreconditionViolated):
    pass


class TooLarge(PreconditionViolated):
    pass


class MissingPayments(PreconditionViolated):
    pass


class IncompleteFractional(PreconditionViolated):
    pass


# solver outcomes
class IterationCapExceeded(BudgetExceeded):
    pass


class SecondaryRayReached(InvariantViolation):
    pass


class ExhaustedWithoutEquilibrium(InvariantViolation):
    pass
