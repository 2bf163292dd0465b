"""Exception hierarchy.

Everything derives from :class:`RPPError`; the value-type errors also derive
from :class:`ValueError` so generic callers can catch them the usual way.
"""


class RPPError(Exception):
    pass


class InvalidParameterError(RPPError, ValueError):
    """A model/prior parameter is outside its domain (sigma <= 0, alpha <= 0, ...)."""


class DomainError(RPPError, ValueError):
    """A function was evaluated outside its domain (e.g. log-normal at t <= 0)."""


class InvalidSequenceError(RPPError, ValueError):
    pass


class DegenerateFitError(RPPError):
    """The maximum-likelihood problem has no interior solution."""


class DegenerateExposureError(DegenerateFitError):
    """Zero effective exposure with events present; the MLE of the fitness diverges."""


class IllPosedError(RPPError):
    """The corpus carries no information (e.g. every item is empty)."""


class HorizonError(RPPError, ValueError):
    """Forecast horizon precedes the end of the observation window."""


class DivergentForecastError(RPPError):
    """The posterior expectation of the forecast does not exist."""
