"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An input violates a documented precondition."""


class InvalidStateError(ValueError):
    """A matrix is not a physical two-qubit density matrix."""


class DegeneratePhaseError(ValueError):
    """The coherence element is too small to define a phase."""


class FitDegenerateError(ValueError):
    """A fringe scan cannot constrain the sinusoid."""


class UndefinedCorrelatorError(ZeroDivisionError):
    """All four counts entering a correlator are zero."""


class UndefinedVisibilityError(ZeroDivisionError):
    """Both fringe extrema are zero."""


class ConfigurationError(ValueError):
    """A setting table or scenario file is unusable."""


class ConvergenceError(RuntimeError):
    """An iterative estimator stopped before meeting its tolerance.

    The best iterate found so far is kept on ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
