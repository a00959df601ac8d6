"""Exception types shared across the solvers."""


class NumericalRangeError(ArithmeticError):
    """A computation produced a non-finite value or hit a pole."""


class InfiniteDivergenceError(ValueError):
    """Relative entropy is infinite because the carrier condition fails."""


class StagnationError(RuntimeError):
    """An iteration stopped making progress."""


class StallError(RuntimeError):
    """The learning-rate halving schema hit its floor.

    ``state`` holds the solver state at the moment of the stall.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
