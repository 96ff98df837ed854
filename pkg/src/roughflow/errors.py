"""Exception types shared across the package."""


class RoughFlowError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(RoughFlowError):
    """Operands live on different grids or have incompatible shapes."""


class ParameterError(RoughFlowError):
    """A numerical parameter is outside its admissible range."""


class InputError(RoughFlowError):
    """Input data violates a structural precondition."""


class SizeError(RoughFlowError):
    """Problem size exceeds what the implementation supports."""


class CapabilityError(RoughFlowError):
    """The requested operation needs data this object does not carry."""


class NumericalError(RoughFlowError):
    """A numerical routine failed beyond its built-in fallbacks."""


class SingularityError(RoughFlowError):
    """Evaluation requested at or across a non-integrable singularity."""


class ResolutionError(RoughFlowError):
    """Quadrature or sampling resolution is insufficient for the target."""


class ExtrapolationError(RoughFlowError):
    """Evaluation requested outside the domain a solution was computed on."""
