"""Exception types raised across the package."""


class BernoulliError(Exception):
    """Base class for all package errors."""


class DegenerateBody(BernoulliError):
    """Support data does not describe a body with non-empty interior."""


class GridMismatch(BernoulliError):
    """Two objects live on different angle grids."""


class InvalidConstraint(BernoulliError):
    """Boundary constraint is not bounded away from zero."""


class BoundaryContact(BernoulliError):
    """Inner body touches (or nearly touches) the outer domain."""


class MeshFold(BernoulliError):
    """Ring mesh has a non-positive cell Jacobian."""


class InvalidExponent(BernoulliError):
    """The p-Laplacian exponent must satisfy p > 1."""


class NoConvergence(BernoulliError):
    """Iteration cap reached; ``field`` holds the last iterate."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class OutOfRange(BernoulliError):
    """Evaluation point outside the admissible interval."""


class CollapseDetected(BernoulliError):
    """Trial body degenerated during the free boundary iteration."""


class BracketError(BernoulliError):
    """Bisection bracket endpoints have the same classification."""


class EmptyLevel(BernoulliError):
    """Requested superlevel set has no grid nodes."""


class NoTriple(BernoulliError):
    """No admissible triple of grid nodes contains the query point."""


class NotQuasiConcave(BernoulliError):
    """Input grid function is not quasi-concave to ladder resolution."""


class ConfigError(BernoulliError):
    """Malformed or out-of-range problem configuration."""
