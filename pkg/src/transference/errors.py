"""Exception types shared across the package."""


class TransferenceError(Exception):
    """Base class for every error raised by this package."""


class PreconditionError(TransferenceError, ValueError):
    """Input violates a documented precondition (CLI exit code 2)."""


class CoprimalityViolation(PreconditionError):
    def __init__(self, N, m):
        self.N = N
        self.m = m
        super().__init__(f"N={N} shares a factor with {m}; need gcd(N, (k-1)!) = 1")


class ArityMismatch(PreconditionError):
    pass


class EmptySupport(PreconditionError):
    pass


class ZeroMass(PreconditionError):
    pass


class BudgetExceeded(PreconditionError):
    def __init__(self, cost, budget):
        self.cost = cost
        self.budget = budget
        super().__init__(f"exact evaluation needs {cost} steps, budget is {budget}")


class WrongK(PreconditionError):
    pass


class NotDominated(PreconditionError):
    pass


class RangeViolation(PreconditionError):
    pass


class NoConvergence(TransferenceError):
    """Boosting loop hit its iteration cap; ``result`` holds the best model found."""

    def __init__(self, max_iters, result):
        self.max_iters = max_iters
        self.result = result
        super().__init__(
            f"no convergence after {max_iters} iterations (best gap {result.final_gap:.3g})")


class StageError(TransferenceError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the original."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")
