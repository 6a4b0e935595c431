"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the function."""


class ValidityError(ValueError):
    """Model primitives violate a shape or interiority assumption."""


class UndeliverableRentError(ValueError):
    """The requested information rent cannot be paid with the given quantities."""


class StructuralError(ValueError):
    """An allocation is malformed (missing cohort, bad masses, ...)."""


class CohortLookupError(KeyError):
    """No separating sequence is stored for the requested reveal date."""


class ThresholdRangeError(ValueError):
    """A bisection range does not bracket a single sign change."""
