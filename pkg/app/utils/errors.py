"""Exception hierarchy shared by the library and the CLI."""

from pathlib import Path
from typing import Optional


class ScDefenseError(Exception):
    """Base class for every error raised by this package"""


class ConfigurationError(ScDefenseError):
    pass


class BoundsError(ScDefenseError, IndexError):
    pass


class DomainError(ScDefenseError, ValueError):
    """A value lies outside the domain an operation accepts"""


class UsageError(ScDefenseError, ValueError):
    pass


class ShapeError(UsageError):
    pass


class FormatError(ScDefenseError):
    """A file does not carry the expected magic, version or tag"""


class LengthError(ScDefenseError):
    """A file payload is empty or shorter than its header declares"""


class DataError(ScDefenseError):
    pass


class TrainingDivergedError(ScDefenseError):
    def __init__(self, epoch: int, batch: int, loss: float):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(
            f"Training diverged at epoch {epoch}, batch {batch} (loss={loss})"
        )


class AttackNumericalError(ScDefenseError):
    pass


class MissingArtifactError(ScDefenseError):
    def __init__(self, path: Path, command: Optional[str] = None):
        self.path = Path(path)
        self.command = command
        message = f"Required file not found: {self.path}"
        if command:
            message += f" (produce it with: {command})"
        super().__init__(message)
