"""Exception hierarchy shared across cue3d."""


class Cue3DError(Exception):
    """Base class for all cue3d errors."""


class EmptyMask(Cue3DError):
    pass


class PlacementFailed(Cue3DError):
    pass


class DegenerateMesh(Cue3DError):
    pass


class EmptyResult(Cue3DError):
    pass


class EmptyCloud(Cue3DError):
    pass


class DimensionMismatch(Cue3DError):
    pass


class TooSmall(Cue3DError):
    pass


class LengthMismatch(Cue3DError):
    pass


class MissingBaseline(Cue3DError):
    pass


class MissingVariant(Cue3DError):
    pass


class InsufficientData(Cue3DError):
    pass


class InsufficientSeeds(Cue3DError):
    pass


class DivisionByZeroGuard(Cue3DError):
    pass


class ManifestInvalid(Cue3DError):
    pass


class RunnerFailed(Cue3DError):
    pass


class RunnerTimeout(RunnerFailed):
    pass


class ParseError(Cue3DError):
    pass
