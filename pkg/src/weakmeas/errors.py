"""Exception hierarchy shared by all weakmeas modules."""


class WeakMeasError(Exception):
    """Base class for every error raised by weakmeas."""


class ZeroVector(WeakMeasError, ValueError):
    pass


class DimensionMismatch(WeakMeasError, ValueError):
    pass


class NotHermitian(WeakMeasError, ValueError):
    pass


class IndexOutOfRange(WeakMeasError, IndexError):
    pass


class InvalidSpin(WeakMeasError, ValueError):
    pass


class InvalidAxis(WeakMeasError, ValueError):
    pass


class OrthogonalSelection(WeakMeasError, ArithmeticError):
    """Pre- and post-selected states are (numerically) orthogonal."""

    def __init__(self, overlap_magnitude, guard):
        self.overlap_magnitude = overlap_magnitude
        self.guard = guard
        super().__init__(
            f"|<post|pre>| = {overlap_magnitude:.3e} is at or below the "
            f"orthogonality guard {guard:.1e}"
        )


class IncompatibleSelections(WeakMeasError, ArithmeticError):
    """No intermediate outcome is compatible with both selections."""


class ZeroPostSelection(WeakMeasError, ArithmeticError):
    pass


class QuadratureNotConverged(WeakMeasError, RuntimeError):
    pass


class TooImprobable(WeakMeasError, RuntimeError):
    """Physical post-selection would need more attempts than allowed."""

    def __init__(self, probability, message=None):
        self.probability = probability
        super().__init__(
            message or f"post-selection probability {probability:.6e} is too small"
        )
