"""Exception types shared across the package.

The CLI maps these onto stable exit codes: configuration problems exit 2,
data problems exit 3, numerical divergence exits 4.
"""


class OrthoRegError(Exception):
    """Base class for all package errors."""


class ConfigError(OrthoRegError):
    """Invalid configuration key, value, or combination."""


class ParseError(OrthoRegError):
    """Malformed input file; message carries the offending line number."""


class EmptyGraph(OrthoRegError):
    """Graph has no edges where at least one is required."""


class MissingFile(OrthoRegError):
    """A required dataset file is absent."""


class ShapeMismatch(OrthoRegError):
    """Inconsistent array shapes or index sets."""


class EmptyMask(OrthoRegError):
    """An index set that must be non-empty is empty."""


class NotSymmetric(OrthoRegError):
    """Matrix fails the symmetry precondition."""


class NoConvergence(OrthoRegError):
    """Iterative solver hit its iteration cap."""


class UnstableStepSize(OrthoRegError):
    """Explicit iteration step size violates its stability bound."""


class InputNotWhitened(OrthoRegError):
    """Input covariance is not the identity within tolerance."""


class Divergence(OrthoRegError):
    """Loss or iterate became non-finite."""
