"""Exception hierarchy shared across the toolkit.

The command-line driver maps these onto exit-code families:
configuration and parse problems exit 2, file I/O problems exit 3,
domain (math precondition) violations exit 4.
"""


class UdcError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(UdcError):
    """Malformed configuration or metadata file (parse family)."""


class ImageIoError(UdcError):
    """Unreadable, corrupt, or unsupported image file (I/O family)."""


class ImageTypeError(ImageIoError):
    """File decodes fine but is not the requested kind of image."""


class ExternalToolError(ImageIoError):
    """An external helper process failed or returned unusable data."""


class DomainError(UdcError):
    """Input violates an operation's mathematical preconditions."""


class DimensionError(DomainError):
    """Shape or size constraint violated."""


class CoverageError(DomainError):
    """Display pattern does not cover the camera aperture."""


class DegenerateKernelError(DomainError):
    """Kernel has zero total energy and cannot be normalized."""


class IllConditionedError(DomainError):
    """Unregularized deconvolution hit near-zero transfer frequencies."""
