"""Exception hierarchy shared by the solver, simulator and CLI."""


class PopMFGError(Exception):
    """Base class for all errors raised by popmfg."""


class InvalidInputError(PopMFGError, ValueError):
    pass


class OutOfRangeError(InvalidInputError):
    pass


class DomainError(PopMFGError, ValueError):
    """An input lies outside the set where a formula is defined."""


class NumericalFailureError(PopMFGError, ArithmeticError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class NoConvergenceError(NumericalFailureError):
    pass


class StepSizeError(PopMFGError, ValueError):
    """The Monte Carlo step is too coarse for first-order switching probabilities."""
