"""Exception types shared across the package.

Contract violations (bad dimensions, out-of-range parameters) raise plain
``ValueError``; the classes below cover runtime numerical failures.
"""


class NumericalError(RuntimeError):
    """An eigensolver or iterative routine failed to produce a usable result."""


class DegenerateRankError(NumericalError):
    """A matrix is numerically rank-deficient where rank >= r was required."""


class DivergenceError(RuntimeError):
    """A solver iterate became non-finite or blew up.

    Carries the trace accumulated up to the failing outer iteration in
    ``trace`` so callers can inspect or persist the partial run.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
