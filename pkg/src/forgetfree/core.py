"""
Contains core functionality for the package.
"""

import io
from abc import ABC, abstractmethod
from typing import ClassVar, Self

import numpy as np

from .exceptions import FormatError
from .types import PathType


class Checkpoint(ABC):
    """Base class for objects stored as versioned binary checkpoints.

    A checkpoint is an uncompressed numpy archive holding the subclass state
    plus two reserved entries: the format name and its version. Loading
    refuses archives written for another format or a newer version.
    """

    FORMAT: ClassVar[str]
    VERSION: ClassVar[int] = 1

    @abstractmethod
    def _state(self, **options: bool) -> dict[str, np.ndarray]:
        """Gets the arrays that fully describe the object."""

    @classmethod
    @abstractmethod
    def _from_state(cls, state: dict[str, np.ndarray]) -> Self:
        """Rebuilds an object from the arrays produced by _state."""

    def to_bytes(self, **options: bool) -> bytes:
        """Serializes the object to checkpoint bytes."""
        buffer = io.BytesIO()
        np.savez(
            buffer,
            __format__=np.array(self.FORMAT),
            __version__=np.array(self.VERSION),
            **self._state(**options),
        )
        return buffer.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> Self:
        """Deserializes an object from checkpoint bytes."""
        try:
            with np.load(io.BytesIO(data), allow_pickle=False) as archive:
                state = {key: archive[key] for key in archive.files}
        except (OSError, ValueError) as error:
            raise FormatError(f"Not a {cls.FORMAT} checkpoint") from error

        # Check the reserved entries before handing over the state
        name = str(state.pop("__format__", ""))
        version = int(state.pop("__version__", -1))
        if name != cls.FORMAT:
            raise FormatError(
                f"Expected a {cls.FORMAT} checkpoint, got '{name}'"
            )
        if not 1 <= version <= cls.VERSION:
            raise FormatError(
                f"Unsupported {cls.FORMAT} checkpoint version {version}"
            )
        return cls._from_state(state)

    def save(self, filepath: PathType, **options: bool) -> None:
        """Saves the checkpoint to the specified filepath."""
        with open(filepath, "wb") as f:
            f.write(self.to_bytes(**options))

    @classmethod
    def load(cls, filepath: PathType) -> Self:
        """Loads a checkpoint from the specified filepath."""
        with open(filepath, "rb") as f:
            return cls.from_bytes(f.read())
