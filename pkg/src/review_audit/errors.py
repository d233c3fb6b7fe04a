"""Exception hierarchy shared by every analysis."""


class AuditError(Exception):
    """Base class for all toolkit errors."""


class ParseError(AuditError, ValueError):
    """A dataset file could not be parsed.

    ``locus`` names the offending line or field path so the message points
    straight at the bad record.
    """

    def __init__(self, message, locus=None):
        self.locus = locus
        if locus is not None:
            message = f"{locus}: {message}"
        super().__init__(message)


class ValidationError(AuditError, ValueError):
    """A dataset parsed but violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        head = "; ".join(str(v) for v in self.violations[:5])
        more = len(self.violations) - 5
        if more > 0:
            head += f"; ... and {more} more"
        super().__init__(f"{len(self.violations)} violation(s): {head}")


class PreconditionError(AuditError, ValueError):
    """An analysis cannot run on the data it was given."""


class MissingDataError(PreconditionError):
    """The dataset lacks a data kind the analysis needs (decisions, rankings, ...)."""


class DegenerateError(PreconditionError):
    """Inputs are degenerate for the requested statistic."""


class InfeasibleError(AuditError, ValueError):
    """An assignment or generation request cannot be satisfied."""

    def __init__(self, message, constraint=None):
        self.constraint = constraint
        super().__init__(message)
