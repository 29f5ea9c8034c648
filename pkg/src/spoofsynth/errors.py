"""Exception hierarchy shared by all spoofsynth modules."""


class SynthError(ValueError):
    """Base class for every error raised by spoofsynth."""


# mesher
class DegenerateQuad(SynthError):
    pass


class EmptyOutput(SynthError):
    pass


class InvalidGrid(SynthError):
    pass


class InvalidExtent(SynthError):
    pass


# deform
class InvalidTheta(SynthError):
    pass


class NotPlanar(SynthError):
    pass


# camera
class NonPositiveDistance(SynthError):
    pass


class BehindCamera(SynthError):
    pass


# raster
class EmptyViewport(SynthError):
    pass


# composite
class DegenerateCorners(SynthError):
    pass


# pipeline
class SlotOutOfRange(SynthError):
    pass


class SampleError(SynthError):
    """Wraps a failure inside one synthesis task with the sample it belongs to."""

    def __init__(self, sample_id, cause):
        self.sample_id = sample_id
        self.cause = cause
        super().__init__(f"sample {sample_id}: {type(cause).__name__}: {cause}")


# evalkit
class IndivisibleRatio(SynthError):
    pass


class EmptyPool(SynthError):
    pass


class NonLiveExternal(SynthError):
    pass


class OneClassOnly(SynthError):
    pass


class MissingAttackType(SynthError):
    pass
