"""Exception types shared across the mapping stack."""


class GridMapError(Exception):
    """Base class for all library errors."""


class NegativeMassError(GridMapError):
    """A belief mass was negative."""


class MassOverflowError(GridMapError):
    """Singleton masses sum to more than one."""


class UnknownHypothesisError(GridMapError):
    """A hypothesis label is not part of the frame."""


class FrameMismatchError(GridMapError):
    """Two assignments over different frames cannot be combined."""


class TotalConflictError(GridMapError):
    """Dempster combination is undefined: the conflict mass is (near) one."""

    def __init__(self, conflict: float):
        super().__init__(f"total conflict, K={conflict!r}")
        self.conflict = conflict


class CellOutOfBoundsError(GridMapError):
    """Cell index outside the layer lattice."""


class PointOutsidePatchError(GridMapError):
    """A point does not lie within the patch square it was resolved against."""


class ResolutionConflictError(GridMapError):
    """A layer of the requested type exists with a different resolution step.

    Resampling changes cell semantics and must be requested explicitly.
    """


class UnsupportedTypeError(GridMapError):
    """No merge/split operators are registered for this information type."""


class StepDeltaTooLargeError(GridMapError):
    """Requested resolution change exceeds the configured step-delta cap."""


class DatumMismatchError(GridMapError):
    """Grid maps with different reference datums cannot be fused."""


class EdgeMismatchError(GridMapError):
    """Grid maps with different patch edge lengths cannot be fused."""


class ConfigError(GridMapError):
    """Scenario configuration is invalid; the message carries diagnostics."""
