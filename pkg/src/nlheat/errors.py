"""Exception types shared across the package."""


class InvalidParameter(ValueError):
    pass


class KernelRejected(ValueError):
    def __init__(self, radius: float, value: float, lower: float, upper: float):
        self.radius = radius
        super().__init__(
            f"kernel violates ellipticity at radius {radius:.6g}: "
            f"K={value:.6g} not in [{lower:.6g}, {upper:.6g}]"
        )


class DegenerateGrid(ValueError):
    pass


class OutOfDomain(ValueError):
    pass


class InvalidSigma(ValueError):
    pass


class IncompleteField(ValueError):
    pass


class AssemblyError(RuntimeError):
    pass


class IncompatibleFields(ValueError):
    pass


class DomainViolation(ValueError):
    pass


class SpectralFailure(RuntimeError):
    pass


class SolverError(RuntimeError):
    pass


class IncompleteBoundary(ValueError):
    pass


class InvalidRadius(ValueError):
    pass


class OutOfRange(ValueError):
    pass


class HypothesisNotMet(ValueError):
    pass


class DichotomyViolation(AssertionError):
    pass


class HypothesisViolation(ValueError):
    def __init__(self, index: int, message: str = ""):
        self.index = index
        super().__init__(message or f"hypothesis violated at index {index}")


class InconsistentData(ValueError):
    pass
