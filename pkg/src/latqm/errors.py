"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """A precondition on an argument was violated."""


class ResourceLimit(ValueError):
    """A dense construction was requested beyond the supported size."""


class NumericalInstability(RuntimeError):
    """Time stepping produced a state that can no longer be trusted."""


class NormDriftError(NumericalInstability):
    def __init__(self, tau, norm, initial_norm, tolerance):
        self.tau = tau
        self.norm = norm
        self.initial_norm = initial_norm
        self.tolerance = tolerance
        super().__init__(
            f"norm drifted from {initial_norm:.12g} to {norm:.12g} at tau={tau:.12g} "
            f"(tolerance {tolerance:g}); reduce dtau or use rk4"
        )


class WraparoundError(NumericalInstability):
    """Probability reached the periodic boundary during a scattering run."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""
