"""Exception hierarchy shared by all penmix modules."""


class PenmixError(Exception):
    """Base class for every error raised by this package."""


class NotPositiveDefinite(PenmixError, ValueError):
    pass


class DimensionMismatch(PenmixError, ValueError):
    pass


class DegenerateDensity(PenmixError, FloatingPointError):
    pass


class EmptyComponent(PenmixError):
    """A component carries too little responsibility mass for a covariance estimate."""

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)


class LambdaTooLarge(PenmixError, ValueError):
    pass


class NonpositiveDenominator(PenmixError, ValueError):
    pass


class AllComponentsPruned(PenmixError):
    pass


class InitTooManyComponents(PenmixError, ValueError):
    pass


class TooManyClusters(PenmixError, ValueError):
    pass


class EmptyRange(PenmixError, ValueError):
    pass


class CountMismatch(PenmixError, ValueError):
    pass


class ParseError(PenmixError, ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyFile(PenmixError, ValueError):
    pass
