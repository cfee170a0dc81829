"""Exception types shared across the pipeline."""

from __future__ import annotations


class PseudosegError(Exception):
    """Base class for all library errors."""


class BadMagic(PseudosegError):
    """File does not start with the expected magic bytes."""


class DimMismatch(PseudosegError):
    """Declared and actual dimensions disagree."""


class NonFiniteValue(PseudosegError):
    """A payload contains NaN or infinity."""


class IoFailure(PseudosegError):
    """Underlying read/write failed."""


class NonBinaryPixel(PseudosegError):
    """A mask pixel is outside {0, 1} (or {0, 255} on disk)."""


class ZeroNormPixel(PseudosegError):
    """A pixel feature vector has (near-)zero norm; cosine is undefined."""

    def __init__(self, pixel_index: int):
        super().__init__(f"pixel {pixel_index} has feature norm <= 1e-12")
        self.pixel_index = pixel_index


class IsolatedVertex(PseudosegError):
    """A similarity-graph vertex has no edges after clamping."""

    def __init__(self, vertex: int):
        super().__init__(f"vertex {vertex} is isolated in the similarity graph")
        self.vertex = vertex


class EigFailure(PseudosegError):
    """Eigendecomposition did not converge within tolerance."""


class DegenerateK(PseudosegError):
    """Cluster count is out of the valid range for the operation."""


class EmptyCluster(PseudosegError):
    """A cluster id has no member points."""


class AllDegenerate(PseudosegError):
    """Every candidate cluster count failed."""


class EpisodeDegenerate(PseudosegError):
    """Could not produce the requested number of views with visible foreground."""


class SkippedImage(PseudosegError):
    """Per-image pipeline abort; wraps the degeneracy that caused it."""

    def __init__(self, reason: PseudosegError | str):
        self.reason = reason
        super().__init__(f"image skipped: {reason}")
