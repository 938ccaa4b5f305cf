"""Exception types shared across the package."""


class StarsegError(Exception):
    """Base class for all errors raised by starseg."""


# --- tensor / file format ---

class MalformedHeader(StarsegError):
    """NPY container is structurally invalid (magic, version, header dict, size)."""


class UnsupportedDtype(StarsegError):
    """Tensor dtype outside the supported set {float32, int32, uint8}."""


class FortranOrderUnsupported(StarsegError):
    """Only C-order (row-major) tensors are accepted."""


class IoFailure(StarsegError):
    """Underlying file operation failed."""


class MalformedJson(StarsegError):
    """Sidecar JSON could not be parsed or has the wrong structure."""


class ClassOutOfRange(StarsegError):
    """Class label outside 1..T."""


class DuplicateId(StarsegError):
    """Instance id invalid (non-positive) or repeated in an assignment."""


# --- label images / tensors ---

class BackgroundPixel(StarsegError):
    """Operation requires a foreground pixel but got background."""


class EmptyDataset(StarsegError):
    """Operation needs at least one instance / image."""


class ShapeMismatch(StarsegError):
    """Arrays do not agree in shape where they must."""


class EmptyMask(StarsegError):
    """Instance mask contains no pixels."""


class SimplexViolation(StarsegError):
    """Probability vector does not sum to 1 within tolerance."""


class RaysNotDivisibleBy4(StarsegError):
    """Dihedral transforms need the ray count to be a multiple of 4."""


class DimensionMismatch(StarsegError):
    """Ground-truth and prediction maps have different sizes."""


class LengthMismatch(StarsegError):
    """Paired lists have different lengths."""
