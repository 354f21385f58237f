"""Exception hierarchy shared across the PyAmulet modules."""
from __future__ import annotations

from typing import Iterable, List


class AmuletError(Exception):
    """Base class for every error raised by the package."""


class ShapeError(AmuletError, ValueError):
    """Tensor dimensions do not fit the operation."""


class ConvSpecError(AmuletError, ValueError):
    """Convolution geometry produces a non-integral or empty output."""


class ArityError(AmuletError, ValueError):
    """A network level received the wrong set of above-level inputs."""


class InputError(AmuletError, ValueError):
    """Input values violate the documented domain (e.g. a non-binary mask)."""


class GradCheckError(AmuletError, RuntimeError):
    """Finite-difference checking could not be carried out."""


class DivergenceError(AmuletError, RuntimeError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message: str, iteration: int | None = None) -> None:
        super().__init__(message)
        self.iteration = iteration


class NetpbmError(AmuletError, ValueError):
    """Malformed or unsupported PPM/PGM file."""

    def __init__(self, message: str, offset: int | None = None) -> None:
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class CheckpointError(AmuletError, ValueError):
    """Checkpoint file is corrupt or does not match the network."""


class ConfigError(AmuletError, ValueError):
    """Configuration document is malformed; ``key`` names the offending entry."""

    def __init__(self, message: str, key: str | None = None) -> None:
        super().__init__(message)
        self.key = key


class _MissingIdsMixin:
    ids: List[str]

    @staticmethod
    def _describe(prefix: str, ids: Iterable[str]) -> tuple[str, List[str]]:
        listed = list(ids)
        return f"{prefix}: {', '.join(listed)}", listed


class ManifestError(_MissingIdsMixin, AmuletError, RuntimeError):
    """Manifest references files that do not exist."""

    def __init__(self, ids: Iterable[str], reason: str = "missing files for ids") -> None:
        message, self.ids = self._describe(f"manifest: {reason}", ids)
        super().__init__(message)


class ReportError(_MissingIdsMixin, AmuletError, RuntimeError):
    """Evaluation could not find a prediction for every ground-truth id."""

    def __init__(self, ids: Iterable[str]) -> None:
        message, self.ids = self._describe("eval: missing predictions for ids", ids)
        super().__init__(message)


__all__ = [
    "AmuletError",
    "ShapeError",
    "ConvSpecError",
    "ArityError",
    "InputError",
    "GradCheckError",
    "DivergenceError",
    "NetpbmError",
    "CheckpointError",
    "ConfigError",
    "ManifestError",
    "ReportError",
]
