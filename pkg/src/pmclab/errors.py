"""Exception hierarchy shared by the solvers and the experiment runner."""


class PmcLabError(Exception):
    """Base class for all laboratory errors."""


class ConfigError(PmcLabError):
    pass


class GeometryError(PmcLabError):
    """Invalid domain or metric (non star-shaped boundary, bad warp, ...)."""


class MeshError(PmcLabError):
    pass


class MeshParseError(MeshError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SolverError(PmcLabError):
    pass


class BracketFailure(SolverError):
    pass


class StiffProfile(SolverError):
    pass


class NonConvergence(SolverError):
    pass


class NewtonDiverged(SolverError):
    pass


class JacobianSingular(SolverError):
    pass


class ContinuationStalled(SolverError):
    pass


class StiffBoundary(SolverError):
    """Recovered boundary flux reached |q| >= 1."""


class HypothesisViolated(PmcLabError):
    """A theorem hypothesis fails; the quantity is not applicable."""

    def __init__(self, hypothesis, message=None):
        self.hypothesis = hypothesis
        super().__init__(message or f"hypothesis violated: {hypothesis}")
