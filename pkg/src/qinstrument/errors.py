"""Exception hierarchy.

Every error raised by the library derives from :class:`InstrumentError` so
callers (notably the scenario runner) can separate domain failures from bugs.
"""


class InstrumentError(Exception):
    """Base class for all library errors."""


class DimMismatch(InstrumentError, ValueError):
    pass


class NotHermitian(InstrumentError, ValueError):
    pass


class NotPSD(InstrumentError, ValueError):
    """Matrix has an eigenvalue below ``-psd_tol``.

    Raised by ``kraus_from_choi`` this means the presented map is not
    completely positive.
    """


class SingularNormalizer(InstrumentError, ValueError):
    pass


class InvariantViolation(InstrumentError, ValueError):
    """A constructed object fails its type invariant.

    ``invariant`` names the failed check, ``residual`` is the measured excess.
    """

    def __init__(self, invariant: str, residual: float, detail: str = ""):
        self.invariant = invariant
        self.residual = float(residual)
        msg = f"{invariant} violated (residual {self.residual:.3e})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class LabelMismatch(InstrumentError, ValueError):
    pass


class BadWeights(InstrumentError, ValueError):
    pass


class BadStochasticMatrix(InstrumentError, ValueError):
    pass


class BadFactorization(InstrumentError, ValueError):
    pass


class ZeroProbability(InstrumentError, ValueError):
    pass


class NonCommuting(InstrumentError, ValueError):
    pass


class InstrumentDoesNotMeasureA(InstrumentError, ValueError):
    pass


class StateMismatch(InstrumentError, ValueError):
    pass


class UncertifiedJoint(InstrumentError, ValueError):
    pass


class ParseError(InstrumentError, ValueError):
    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class ScenarioReferenceError(InstrumentError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""
