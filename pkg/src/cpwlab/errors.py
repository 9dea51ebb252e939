"""Exception hierarchy shared by all cpwlab modules."""


class CpwlabError(Exception):
    """Base class for every error raised by cpwlab."""


class DomainError(CpwlabError, ValueError):
    """Argument outside the domain of a function."""


class DivergenceError(CpwlabError, ArithmeticError):
    """Result is infinite or not representable (e.g. K(1))."""


class NoSolutionError(CpwlabError):
    """An inverse design problem has no root in the search interval.

    ``bracket`` holds the (low, high) values reachable on the interval.
    """

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class UnphysicalParametersError(CpwlabError, ValueError):
    """Parameters imply a non-positive quality factor."""


class DegenerateGeometryError(CpwlabError):
    """Points do not define a circle (identical or collinear)."""


class InsufficientDataError(CpwlabError, ValueError):
    """Too few samples for the requested estimate."""


class FitFailure(CpwlabError):
    """An iterative fit did not converge.

    ``stage`` names the pipeline step and ``best`` carries the best-so-far
    parameter values, when available.
    """

    def __init__(self, message, stage=None, best=None):
        super().__init__(message)
        self.stage = stage
        self.best = best


class NoResonanceError(FitFailure):
    """The trace does not contain a detectable resonance."""


class SchemaError(CpwlabError, ValueError):
    """Input file header does not match the documented schema."""


class IllPosedFitWarning(UserWarning):
    """Data do not constrain every fit parameter."""
