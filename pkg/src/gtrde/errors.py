"""Exception hierarchy shared by every solver stage."""


class GTRDEError(Exception):
    """Base class for all errors raised by this package."""


class InvalidMatrix(GTRDEError, ValueError):
    """A matrix argument is non-finite, non-square or not symmetric."""


class SingularBlock(GTRDEError, ArithmeticError):
    """The pivot block of a Schur complement is numerically singular."""


class InvalidProblem(GTRDEError, ValueError):
    """Problem data violate a structural invariant (shapes, generator, period)."""


class ParseError(InvalidProblem):
    """A problem or solution document does not match its schema.

    Parameters
    ----------
    path : str
        JSON-pointer-like location of the offending field, e.g. ``modes/1/R``.
    message : str
        Human readable description.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InvalidMode(GTRDEError, IndexError):
    """A mode index outside ``0 .. N-1``."""


class InvalidOperand(GTRDEError, ValueError):
    """An operand tuple is dimensionally inconsistent with the problem."""


class SingularInnerBlock(GTRDEError, ArithmeticError):
    """``R + sum_k B_k' X B_k`` is singular for some mode and time."""

    def __init__(self, mode, t, detail=""):
        self.mode = mode
        self.t = t
        msg = f"inner matrix singular at mode {mode}, t={t:.6g}"
        super().__init__(msg + (f" ({detail})" if detail else ""))


class SignConditionLost(GTRDEError):
    """The weight ``R^(h)`` lost the inertia ``(m2 positive, m1 negative)``."""

    def __init__(self, h, t, mode, inertia):
        self.h = h
        self.t = t
        self.mode = mode
        self.inertia = inertia
        super().__init__(
            f"iteration {h}: sign condition lost at mode {mode}, t={t:.6g}; "
            f"inertia (pos, neg, zero) = {inertia}"
        )


class NonFiniteState(GTRDEError, ArithmeticError):
    """Backward integration escaped the admissible magnitude bound."""


class NoConvergence(GTRDEError):
    """An iteration exhausted its budget without meeting its tolerance.

    Attributes
    ----------
    history : list of float
        The change/delta sequence observed before giving up.
    """

    def __init__(self, message, history=()):
        self.history = list(history)
        super().__init__(message)


class InnerFailure(GTRDEError):
    """A deterministic subproblem failed inside the outer iteration."""

    def __init__(self, h, mode, cause):
        self.h = h
        self.mode = mode
        self.cause = cause
        super().__init__(f"inner solve failed at iteration {h}, mode {mode}: {cause}")


class AssumptionViolation(GTRDEError):
    """The problem instance fails the standing assumptions."""

    def __init__(self, report):
        self.report = report
        super().__init__(f"assumptions violated: {report.summary()}")


class MonotonicityViolation(GTRDEError):
    """Consecutive iterates are not ordered in the PSD sense."""


class UnsupportedTimeVarying(GTRDEError):
    """An operation that needs constant coefficients got a periodic system."""


class NumericalFailure(GTRDEError, ArithmeticError):
    """An eigen-solver or certification step failed."""


class UnstableSolution(GTRDEError):
    """The converged solution does not stabilize the closed loop."""

    def __init__(self, certificate):
        self.certificate = certificate
        super().__init__(
            f"closed loop not mean-square stable: {certificate.kind} = {certificate.value:.6g}"
        )
