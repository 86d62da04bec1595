"""Exception hierarchy shared by all splitwire modules."""


class SplitwireError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SplitwireError, ValueError):
    """Tensor or layer shapes are inconsistent."""


class RangeError(SplitwireError, ValueError):
    """A scalar argument is outside its documented range."""


class ArgumentError(SplitwireError, ValueError):
    """An argument violates a precondition that is not a shape or range."""


class CodecError(SplitwireError, ValueError):
    """Quantized payload is corrupt or inconsistent with its metadata."""


class NoCrossoverError(SplitwireError, ValueError):
    """The bracketed rate interval contains no delay crossover."""


class ProtocolError(SplitwireError, ValueError):
    """Wire message is malformed or violates the framing contract."""


class TransportError(SplitwireError, OSError):
    """Socket-level failure while moving frames between head and tail."""
