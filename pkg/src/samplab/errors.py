"""Exception types shared across the package."""


class SamplabError(Exception):
    """Base class for all package-specific errors."""


class CapacityError(SamplabError):
    """A requested dense computation exceeds the configured size ceiling."""


class FactorizationError(SamplabError):
    """Covariance factorization failed even after jitter escalation."""


class LayoutError(SamplabError):
    """A sampling design or lattice layout does not fit the frame or region."""


class PackingError(SamplabError):
    """Plot placement could not satisfy separation constraints."""


class CollinearityError(SamplabError):
    """Design matrix is rank deficient beyond tolerance."""


class InsufficientSampleError(SamplabError):
    """Too few observations for the requested fit or summary."""


class TransformError(SamplabError):
    """Response values are incompatible with the requested transform."""


class IngestionError(SamplabError):
    """A data file or its sidecar failed validation."""


class GeometryError(SamplabError):
    """A geometric precondition does not hold."""


class FitError(SamplabError):
    """Model fitting failed to produce usable parameters."""


class ConfigError(SamplabError):
    """An experiment configuration is invalid."""


class UndefinedBiasError(SamplabError):
    """Percent bias is undefined because the empirical variance is not positive."""
