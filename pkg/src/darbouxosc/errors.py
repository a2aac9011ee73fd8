"""Exception hierarchy shared by all modules."""


class DarbouxError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(DarbouxError, ValueError):
    """Invalid model parameters or an operation not defined for them."""


class DomainError(DarbouxError, ValueError):
    """A phase point lies outside the domain of the selected manifold."""


class SingularityError(DomainError):
    """A point falls inside the guard band around the critical radius."""


class FlatLimitError(ParameterError):
    """The operation needs a nonzero deformation parameter."""


class OriginError(DomainError):
    """Hyperspherical coordinates requested at q = 0."""


class ChartError(DomainError):
    """Hyperspherical chart is singular at the requested point."""


class RangeError(DomainError):
    """A canonical coordinate lies outside the image of its transform."""


class DegenerateStateError(DarbouxError):
    """Jacobian rank collapsed at a non-generic phase point."""

    def __init__(self, message, rank=0):
        super().__init__(message)
        self.rank = rank


class ConvergenceError(DarbouxError, RuntimeError):
    """An implicit stage equation did not converge."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class DomainExitError(DomainError):
    """A trajectory left (or started outside) the guarded domain."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class UnboundOrbitError(DarbouxError):
    """No pericenter structure was found along a trajectory."""
