"""Exception types raised across the package."""


class TDEError(Exception):
    """Base class for all package errors."""


class ParameterError(TDEError, ValueError):
    """Invalid argument, configuration or dimension mismatch."""


class InfeasibleDrawError(TDEError):
    """Rejection sampling gave up before producing a valid scene."""


class GeometryError(TDEError):
    """Degenerate polar-arc geometry (adjacent atoms parallel or opposite)."""


class SelectionExhaustedError(TDEError):
    """Every dictionary index is inside the exclusion band."""


class RankDeficientError(TDEError):
    """The least-squares basis lost rank when an atom was added.

    ``atom_index`` is the position (in selection order) of the atom that
    made the basis rank deficient.
    """

    def __init__(self, message, atom_index):
        super().__init__(message)
        self.atom_index = atom_index


class ConvergenceError(TDEError):
    """Iterative solver hit its iteration cap.

    The best iterate found so far is kept in ``best``.
    """

    def __init__(self, message, best, iterations):
        super().__init__(message)
        self.best = best
        self.iterations = iterations
