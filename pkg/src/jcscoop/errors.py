class DomainError(ValueError):
    """An argument lies outside the domain where a formula is defined."""


class NumericalError(ArithmeticError):
    """A numerical routine (quadrature, root finding, EM) failed to converge."""


class ApproximationError(DomainError):
    """A closed-form approximation is evaluated outside its range of validity."""
