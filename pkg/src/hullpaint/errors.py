"""Exception hierarchy shared across the package."""


class HullpaintError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(HullpaintError, ValueError):
    """An argument violates a documented precondition."""


class NoRegionError(InvalidInputError):
    """An operation that needs at least one set mask pixel got an empty mask."""


class ManifestError(HullpaintError):
    """A scene manifest could not be parsed; the message names the offending field."""


class ValidationError(HullpaintError):
    """A loaded scene entry is inconsistent (e.g. image/camera dimension mismatch)."""


class CheckpointError(HullpaintError):
    """Base class for checkpoint load failures."""


class IncompatibleCheckpointError(CheckpointError):
    """Magic bytes or container version do not match what this build writes."""


class CorruptCheckpointError(CheckpointError):
    """The checkpoint file is truncated or internally inconsistent."""


class TrainingDivergedError(HullpaintError):
    """Training produced a non-finite loss."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite loss at step {step}")


class ProtocolError(HullpaintError):
    """The inpaint backend violated the wire contract (bad status, bad payload, wrong dims)."""


class TransportError(HullpaintError):
    """The inpaint backend was unreachable or timed out; safe to retry."""


class DegenerateHullWarning(UserWarning):
    """A silhouette with no set pixels makes the hull empty."""
