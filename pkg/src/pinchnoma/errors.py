"""Exception hierarchy shared by every module."""


class PinchError(Exception):
    """Base class for all package errors."""


class DegenerateGeometry(PinchError, ValueError):
    """A user coincides with a radiating point."""


class RankOrder(PinchError, ValueError):
    """Decoder rank below the rank of the message being decoded."""


class NumericalStep(PinchError, ArithmeticError):
    """Finite-difference step vanishes at the working precision."""


class Infeasible(PinchError):
    """Constraints admit no solution (placement guard or power budget)."""


class BudgetExceeded(PinchError):
    """Brute-force enumeration would exceed the combination budget."""


class DegenerateObjective(PinchError, ValueError):
    """Reference objective is not strictly positive."""


class DegenerateChannel(PinchError, ValueError):
    """A channel gain is exactly zero."""


class ShapeError(PinchError, ValueError):
    pass


class DataTooSmall(PinchError, ValueError):
    pass


class EmptyData(PinchError, ValueError):
    pass


class ConfigError(PinchError, ValueError):
    pass


class CorruptArtifact(PinchError):
    """A persisted file failed its magic/version/checksum checks."""
