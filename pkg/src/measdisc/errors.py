"""Exception hierarchy shared by all modules."""


class MeasDiscError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(MeasDiscError, ValueError):
    """Input failed a structural check; the CLI maps these to exit code 2."""


class NotSquare(ValidationError):
    pass


class NotUnitary(ValidationError):
    pass


class NotDensityMatrix(ValidationError):
    pass


class NotProjector(ValidationError):
    pass


class NotPure(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class DimensionTooLarge(ValidationError):
    pass


class BadParams(ValidationError):
    pass


class UnknownFamily(BadParams):
    pass


class BadN(ValidationError):
    pass


class BadDim(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class ConvergenceFailure(MeasDiscError):
    """A numerical routine did not reach its tolerance."""


class SaddleInfeasible(MeasDiscError):
    """No equal-diagonal pair of extreme-eigenspace states was found."""


class NoConvexCombination(MeasDiscError):
    """Zero is not in the triangle spanned by the N-fold extreme eigenvalues."""


class SingularPencil(MeasDiscError):
    """Projector sum is too ill-conditioned for a trustworthy pseudo-inverse."""
