"""Exception hierarchy shared across the package.

Every error the library raises derives from `WedgeflowError` so callers can
catch broadly; the CLI maps the concrete classes to its exit-code contract.
"""


class WedgeflowError(Exception):
    """Base class for all wedgeflow errors."""


class DomainError(WedgeflowError, ValueError):
    """An argument is outside its mathematical domain (angle range, dual cone, ...)."""


class DegeneratePushingError(DomainError):
    """sin(delta) or sin(epsilon) too small: pushing directions are unbounded."""


class DegenerateDriftError(WedgeflowError):
    """The drift angle hits a degeneracy excluded by the admissibility condition."""


class UnstableDriftError(WedgeflowError):
    """The drift lies outside the stability cone; no stationary distribution exists."""


class NotSumOfExponentialsError(WedgeflowError):
    """The geometry parameter -alpha is not a nonnegative integer, so the
    stationary density admits no finite sum-of-exponentials form."""


class NonIntegrableError(WedgeflowError):
    """A requested integral diverges (an exponent fails to decay on the wedge)."""


class InvalidDensityError(WedgeflowError):
    """A candidate density changes sign and cannot be normalized."""


class DegeneratePairError(WedgeflowError):
    """A two-term boundary pair has a vanishing coefficient inner product."""


class EvaluationAtNodeError(WedgeflowError):
    """Corner-limit evaluation requested at an angle where the limit profile vanishes."""


class NumericalBlowupError(WedgeflowError):
    """Simulation state became non-finite."""


class InconsistencyError(WedgeflowError):
    """Two routes to the same quantity disagree beyond tolerance, or a value
    left its mathematically guaranteed range."""
