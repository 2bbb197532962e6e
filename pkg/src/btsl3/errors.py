"""Exception types raised by the library."""


class BuildingError(ValueError):
    """Base class for invalid-input errors in this package."""


class InvalidVector(BuildingError):
    pass


class ZeroVector(BuildingError):
    pass


class EmptyTrajectory(BuildingError):
    pass


class SingularMatrix(BuildingError):
    pass


class NotInGroup(BuildingError):
    pass


class NonRegularType(BuildingError):
    """Raised when a flag or germ is requested for a type on a Weyl wall.

    ``wall`` is 1 when the line is ambiguous (first root pairing vanishes),
    2 when the plane is ambiguous, 0 when both are.
    """

    def __init__(self, message, wall=None):
        super().__init__(message)
        self.wall = wall


class NonRegular(BuildingError):
    pass


class NotInResidue(BuildingError):
    pass


class InvalidEndSet(BuildingError):
    pass


class InvalidEpsilon(BuildingError):
    pass


class EmptyMeasure(BuildingError):
    pass


class TooFewAtoms(BuildingError):
    pass


class InvalidDepth(BuildingError):
    pass


class InvalidArgument(BuildingError):
    pass


class ConfigError(BuildingError):
    pass
