"""Exception types shared across the package."""


class DegenerateAxesError(ValueError):
    """Optical axes are parallel beyond tolerance; the intersection point is not unique."""


class DegenerateScaleError(ValueError):
    """All translation payloads are (near) zero; normalization divisor undefined."""


class AlignmentDegeneracyError(ValueError):
    """Point set is rank deficient (e.g. collinear); similarity alignment is not unique."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss."""
