"""Exception hierarchy.

Each family maps to a distinct CLI exit code (see ``poreident.cli``).
"""


class PoreIdentError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(PoreIdentError, ValueError):
    exit_code = 2


class MissingArtifactError(PoreIdentError, FileNotFoundError):
    exit_code = 6


class FormatError(PoreIdentError, ValueError):
    exit_code = 2


# geometry / mesh

class GeometryError(PoreIdentError, ValueError):
    exit_code = 3


class OverlapError(GeometryError):
    pass


class OutOfDomainError(GeometryError):
    pass


class MeshQualityError(GeometryError):
    pass


# solvers

class SolverError(PoreIdentError, RuntimeError):
    exit_code = 4


class SingularSystemError(SolverError):
    pass


class LinearSolveError(SolverError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NonConvergenceError(SolverError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class MeshMismatchError(SolverError):
    pass


# identification

class IdentificationError(PoreIdentError):
    exit_code = 5


class GridMismatchError(IdentificationError, ValueError):
    pass


class EmptyAdmissibleError(IdentificationError):
    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage
