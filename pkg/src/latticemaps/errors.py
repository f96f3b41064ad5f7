class LatticeMapsError(Exception):
    """Base class; ``exit_code`` is used by the command-line front end."""

    exit_code = 1
    stage = "run"


class InputError(LatticeMapsError, ValueError):
    exit_code = 3
    stage = "input"


class LatticeError(LatticeMapsError, ValueError):
    exit_code = 4
    stage = "lattice"


class CutError(LatticeMapsError, ValueError):
    exit_code = 5
    stage = "cuts"


class SolverError(LatticeMapsError, RuntimeError):
    exit_code = 6
    stage = "solver"

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class GeometryError(LatticeMapsError, ValueError):
    exit_code = 7
    stage = "geometry"
