"""Exception hierarchy for numerical failure modes.

Every exception below derives from :class:`NhtopoError`, so callers that
sweep over many quasimomenta can catch one base class, record the failed
point and keep going.
"""


class NhtopoError(Exception):
    """Base class for all numerical failures raised by this package."""


class ConfigError(NhtopoError):
    """Invalid scenario or CLI configuration."""


class ExceptionalPointError(NhtopoError):
    """The squared energy is (numerically) zero: eigenvectors coalesce."""


class BranchPoleError(NhtopoError):
    """hx^2 + hy^2 = 0: the azimuthal angle is undefined at this point."""


class BandTrackingLostError(NhtopoError):
    """Eigenvalue continuation jumped too far between neighbouring k samples."""


class UnwrapAmbiguousError(NhtopoError):
    """An adjacent-sample phase jump is too large to unwrap reliably."""


class NotConvergedError(NhtopoError):
    """An iterative procedure failed to meet its convergence tolerance."""


class DegenerateAverageError(NhtopoError):
    """Both time-averaged texture components vanished; no angle defined."""


class DegenerateTextureError(NhtopoError):
    """Both in-plane texture components of a band vanished; no angle defined."""


class PositivityLostError(NhtopoError):
    """M(t) - I lost positive definiteness; a larger eta0 is required."""


class NonHermitianResidualError(NhtopoError):
    """Anti-Hermitian residue of a dilated generator exceeded its bound."""


class SingleBandDegenerateError(NhtopoError):
    """A fitted series contains essentially one band; both are required."""


class EmptyProjectionError(NhtopoError):
    """The ancilla-|0> weight of a dilated state is numerically zero."""


class LengthMismatchError(NhtopoError):
    """Two series that must share a grid have different lengths."""
