"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes, so every failure that can reach a user
should be one of these classes.
"""


class LHICError(Exception):
    """Base class for all package errors."""


class ShapeError(LHICError, ValueError):
    """Tensor or image dimensions do not satisfy an operation's contract."""


class GraphError(LHICError, RuntimeError):
    """Autodiff misuse, e.g. calling backward on a tensor with no recorded graph."""


class NonFiniteError(LHICError, FloatingPointError):
    """NaN or infinity where finite numbers are required."""


class RangeError(LHICError, ValueError):
    """A value lies outside the domain an operation accepts."""


class CodecError(LHICError):
    """A layer codec failed to encode or decode."""

    def __init__(self, message, *, stage=None, output=None):
        if stage:
            message = f"[{stage}] {message}"
        super().__init__(message)
        self.stage = stage
        self.output = output


class CodecConfigError(CodecError):
    """An external codec is selected but not usable (missing binary, bad path)."""


class ContainerError(LHICError, ValueError):
    """Base class for bitstream parse failures."""


class TruncatedStreamError(ContainerError):
    pass


class BadMagicError(ContainerError):
    pass


class UnsupportedVersionError(ContainerError):
    pass


class LengthError(ContainerError):
    """Declared payload length disagrees with the bytes present."""


class HeaderFieldError(ContainerError):
    """A header field carries a value outside its enumerated domain."""


class ModelMismatchError(LHICError):
    """Bitstream was produced with a different model than the one supplied."""


class CheckpointError(LHICError, ValueError):
    """Malformed model checkpoint file."""
