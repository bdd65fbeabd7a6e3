from dataclasses import dataclass


class BavitError(Exception):
    """Base class for errors raised by the bavit package."""


class GeometryError(BavitError, ValueError):
    """Invalid rectangle, grid or kernel geometry."""


class ShapeError(BavitError, ValueError):
    """Tensor shapes disagree; the message names the stage."""


class DataError(BavitError):
    """Unreadable or malformed input data."""


class AnnotationParseError(DataError):
    def __init__(self, path, byte_offset, reason):
        super().__init__(f"{path}: malformed JSON at byte offset {byte_offset}: {reason}")
        self.path = path
        self.byte_offset = byte_offset


class CheckpointError(DataError):
    """Checkpoint file is truncated, corrupt or of an unknown version."""


class NumericError(BavitError, ArithmeticError):
    """Non-finite values where finite ones are required."""


class DivergenceError(NumericError):
    def __init__(self, message, params=None, epoch=None, step=None):
        super().__init__(message)
        self.params = params
        self.epoch = epoch
        self.step = step


@dataclass(frozen=True)
class SampleError:
    source_id: str
    message: str
