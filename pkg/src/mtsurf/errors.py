"""Exception hierarchy shared across the package."""


class MtsurfError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(MtsurfError):
    """Surface source text rejected, with 1-based position information."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class UnboundIdentifierError(ParseError):
    pass


class BadDomainError(ParseError):
    """Empty or inverted parameter rectangle."""


class GeometryError(MtsurfError):
    """A geometric precondition failed at one or more evaluation points."""


class DomainViolationError(GeometryError):
    """Evaluation point outside the surface's parameter rectangle."""


class EvaluationError(GeometryError):
    """Non-finite value produced while evaluating a surface expression."""


class NotSpacelikeError(GeometryError):
    pass


class FlatPointError(GeometryError):
    """Second-form coefficient triple vanishes; the moving frame is undefined."""


class UmbilicalError(GeometryError):
    """Principal directions degenerate (discriminant not positive)."""


class NotMarginallyTrappedError(GeometryError):
    pass


class StencilOutsideDomainError(GeometryError):
    pass


class MixedBranchError(GeometryError):
    """Grid mixes flat and non-flat behaviour where a single branch is required."""


class DegenerateFitError(GeometryError):
    """All Laplacian samples vanish; the eigenfunction fit is meaningless."""


class DivisionNearZeroError(GeometryError):
    pass


class InconclusiveToleranceError(MtsurfError):
    """A verdict statistic fell within a decade of its threshold."""


class GeneratorError(MtsurfError):
    """Base class for surface-generator failures."""


class UnknownFamilyError(GeneratorError):
    pass


class ConstraintSingularityError(GeneratorError):
    """The algebraic curvature solve degenerated during integration."""


class LostSpacelikeError(GeneratorError):
    pass


class CertificateFailedError(GeneratorError):
    pass


class BudgetExhaustedError(GeneratorError):
    """Optimizer ran out of evaluations; carries the best candidate seen."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best
