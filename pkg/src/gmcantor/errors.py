"""Exception types shared across the package."""

from __future__ import annotations

from dataclasses import dataclass, field


class GMError(Exception):
    """Base class for every error raised by gmcantor."""


class DomainError(GMError, ValueError):
    """Argument outside an operation's domain (unknown vertex, bad indices)."""


class ContractError(GMError):
    """A documented precondition does not hold."""


class DepthError(DomainError):
    """Requested depth exceeds what the tower or atlas can provide."""


class UnsupportedOperation(GMError):
    """Operation not defined for this kind of tower (e.g. backward map without bd)."""


class ConstructionError(GMError):
    """A construction step could not be completed (and is not guessed around)."""


class CertificationError(GMError):
    """An exact inequality required by a construction failed."""

    def __init__(self, message: str, *, where: str = "", inequality: str = "") -> None:
        super().__init__(message)
        self.where = where
        self.inequality = inequality


class SearchFailure(GMError):
    """Return-time search exhausted its horizon."""

    def __init__(self, message: str, *, level: int, horizon: int, depth: int) -> None:
        super().__init__(message)
        self.level = level
        self.horizon = horizon
        self.depth = depth


@dataclass(frozen=True)
class Diagnostic:
    """One finding of a validator.

    ``condition`` is the GM condition number ("1".."5") or a short tag such
    as ``"edge-surjective"``.
    """

    level: int | None
    condition: str
    message: str
    witnesses: tuple = field(default_factory=tuple)

    def __str__(self) -> str:
        where = f"level {self.level}: " if self.level is not None else ""
        wit = f" [witnesses: {', '.join(map(str, self.witnesses))}]" if self.witnesses else ""
        return f"{where}condition {self.condition}: {self.message}{wit}"

    def to_record(self) -> dict:
        return {
            "level": self.level,
            "condition": self.condition,
            "message": self.message,
            "witnesses": [list(w) if isinstance(w, tuple) else w for w in self.witnesses],
        }
