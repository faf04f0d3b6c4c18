"""Exception hierarchy shared by every module."""


class CfmmError(Exception):
    """Base class for domain errors (CLI maps these to exit code 1)."""


class CurveViolation(CfmmError):
    pass


class NegativeReserve(CfmmError):
    pass


class InvalidPrice(CfmmError, ValueError):
    pass


class InvalidStep(CfmmError, ValueError):
    pass


class InvalidOrder(CfmmError, ValueError):
    pass


class NoLimitState(CfmmError):
    pass


class TooManyOrders(CfmmError, ValueError):
    pass


class NoReports(CfmmError):
    pass


class UnknownOrder(CfmmError, KeyError):
    pass


class UnknownArbitrageur(CfmmError, KeyError):
    pass


class InvalidPrior(CfmmError, ValueError):
    pass


class InvalidDistribution(CfmmError, ValueError):
    pass


class EmptyInput(CfmmError, ValueError):
    pass
