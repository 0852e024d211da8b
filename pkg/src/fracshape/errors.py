"""Exception hierarchy shared by all fracshape modules."""


class FracshapeError(Exception):
    """Base class for all errors raised by fracshape."""


class ParameterError(FracshapeError, ValueError):
    """An input parameter is out of range; the message names the field."""


class BudgetError(ParameterError):
    """A requested computation exceeds the dense-assembly size budget."""


class StructuralError(FracshapeError):
    """Objects that must live on the same grid (or be nested) do not."""


class DomainEmptyError(FracshapeError):
    """An operation that needs a nonempty domain received an empty mask.

    Callers translate this to the empty-set conventions: eigenvalues are
    +inf and the resolvent is the null operator.
    """


class NumericError(FracshapeError):
    """An iterative procedure failed to reach its tolerance within budget."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved
