"""Exception types raised by netobs."""


class StructuralError(ValueError):
    """Matrix dimensions or offsets are inconsistent."""


class NotWellPosedError(ValueError):
    """``I - A_SS Phi`` is numerically singular, so no lumped model exists."""


class ResolventSingularError(ArithmeticError):
    """``lambda I - A`` is singular at the requested point."""


class ZeroConsistencyError(RuntimeError):
    """A claimed transmission zero has an empty null space (tolerance mismatch)."""


class PreconditionError(ValueError):
    """An operation was called outside its documented hypotheses."""


class NumericalError(ArithmeticError):
    """A factor that should be invertible is not."""
