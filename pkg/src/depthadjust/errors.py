"""Exception types shared across the package."""


class DepthAdjustError(Exception):
    """Base class for all package-specific errors."""


class FormatError(DepthAdjustError):
    """Malformed file header or payload."""


class EmptyMapError(DepthAdjustError):
    """A disparity map with no valid pixels."""


class SpecError(DepthAdjustError):
    """Invalid synthetic scene specification."""


class DomainError(DepthAdjustError):
    """Numeric argument outside its admissible domain."""


class ShapeMismatchError(DepthAdjustError):
    """Arrays that must share dimensions do not."""


class LengthMismatchError(DepthAdjustError):
    """Vectors that must share length do not."""


class SingularSystemError(DepthAdjustError):
    """Rank-deficient normal equations with no ridge regularization."""


class TerminalStateError(DepthAdjustError):
    """An episode step was requested from a finished episode."""


class EmptyBatchError(DepthAdjustError):
    """A training update was requested with an empty batch."""


class FingerprintMismatchError(DepthAdjustError):
    """Stored model fingerprint does not match the active configuration."""


class ConfigMismatchError(DepthAdjustError):
    """Two artifacts produced under different configurations were combined."""


class ConfigError(DepthAdjustError):
    """Invalid configuration value or config file schema."""
