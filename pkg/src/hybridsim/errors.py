"""Exception hierarchy.

Each class carries the CLI exit code it maps to: 2 for validation and
admissibility problems, 3 for numerical failures, 4 for I/O.
"""


class HybridSimError(Exception):
    exit_code = 1


class ValidationError(HybridSimError):
    exit_code = 2


class NumericalError(HybridSimError):
    exit_code = 3


class ShapeMismatch(ValidationError, ValueError):
    pass


class NonHermitianInput(ValidationError, ValueError):
    pass


class ZeroProbability(NumericalError, ValueError):
    pass


class OddDimension(ValidationError, ValueError):
    pass


class RankDeficiency(ValidationError, ValueError):
    pass


class InadmissibleModel(ValidationError, ValueError):
    pass


class UnsupportedXDependence(ValidationError, ValueError):
    pass


class InfeasibleNoiseChoice(ValidationError, ValueError):
    def __init__(self, message, min_eig=None, minor=None):
        super().__init__(message)
        self.min_eig = min_eig
        self.minor = minor


class MonitoringInfeasible(ValidationError, ValueError):
    pass


class NonFinite(NumericalError, FloatingPointError):
    pass


class ZeroTotalRate(NumericalError, ValueError):
    pass


class CflViolation(NumericalError, ValueError):
    pass


class BoundaryUnderflow(NumericalError, ValueError):
    pass


class SchemaError(ValidationError, ValueError):
    """Config violations; ``errors`` is a list of (json_pointer, message)."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"{ptr or '/'}: {msg}" for ptr, msg in self.errors]
        super().__init__("invalid config:\n  " + "\n  ".join(lines))
