"""Exception hierarchy shared by every module."""


class LipfreeError(Exception):
    pass


class StructuralInputError(LipfreeError, ValueError):
    """Malformed input: wrong shapes, mismatched spaces, unknown labels."""


class PreconditionError(LipfreeError, ValueError):
    """Input is well formed but violates an operation's precondition."""


class DegenerateInputError(LipfreeError, ValueError):
    """Input collapses the construction, e.g. x == y for a separator."""


class ConstructionError(LipfreeError, RuntimeError):
    """A piecewise-linear construction produced inconsistent plateaus."""


class CertificateError(LipfreeError, RuntimeError):
    """A numerical certificate failed its own check."""
