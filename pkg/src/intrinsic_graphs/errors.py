"""Exception types raised by the toolkit."""


class DomainError(ValueError):
    """A query point or region lies outside the domain of a field."""


class PreconditionError(ValueError):
    """An operation was called with inputs violating its preconditions."""


class NonFiniteError(ValueError):
    """A field carries a non-finite value at a grid node."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class FlowCrossingError(RuntimeError):
    """Two characteristics crossed, so zeta -> chi(t, zeta) is not monotone."""

    def __init__(self, t, zeta1, zeta2, gap):
        super().__init__(
            f"characteristics cross at t={t:.6g}: chi(t, {zeta1:.6g}) exceeds "
            f"chi(t, {zeta2:.6g}) by {-gap:.3e}"
        )
        self.t = t
        self.zeta1 = zeta1
        self.zeta2 = zeta2
        self.gap = gap


class ConditioningError(ValueError):
    """Sample abscissae are too close for a stable interpolation solve."""


class AssemblyError(ValueError):
    """The stability form cannot be assembled on the requested window."""


class NumericalError(RuntimeError):
    """An iterative solver failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
