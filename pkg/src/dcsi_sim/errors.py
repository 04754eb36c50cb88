"""Exception types shared across the simulator."""


class DcsiSimError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(DcsiSimError):
    """Invalid configuration key or out-of-range value."""


class NumericalDomainError(DcsiSimError):
    """Input outside the numerical domain of an operation (e.g. a matrix
    that is not Hermitian PSD where one is required, or a singular system)."""


class DegeneratePrecoderError(DcsiSimError):
    """The precoder direction has zero Frobenius norm and cannot be
    normalized to the power budget."""


class StructuralError(DcsiSimError):
    """Inconsistent dimensions or block structure."""


class CapabilityError(DcsiSimError):
    """Requested configuration is outside the supported scope."""
