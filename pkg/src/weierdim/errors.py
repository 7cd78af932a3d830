"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class WindowExhausted(IndexError):
    """A bit window has no digits left on the side an operation consumes.

    Re-encode the point with a larger window half-length.
    """


class UnsupportedParameter(ValueError):
    """The dynamical identities only hold at alpha = 1/2."""


class PrecisionError(ArithmeticError):
    """A requested resolution is below what double precision can resolve."""


class ResourceError(MemoryError):
    """A computation would exceed its memory budget."""
