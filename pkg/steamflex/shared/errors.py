"""Exception types shared across Steamflex."""

from __future__ import annotations

from typing import List, Optional


class SteamflexError(Exception):
    """Base class for all errors raised by steamflex."""


class DomainError(SteamflexError, ValueError):
    """A physical or economic input lies outside its admissible range."""


class ConfigError(SteamflexError, ValueError):
    """Invalid run configuration, preset or unit string."""


class IngestionError(SteamflexError, ValueError):
    """A market or demand input file could not be ingested."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None) -> None:
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ScenarioValidationError(SteamflexError, ValueError):
    """Scenario assembly found one or more alignment violations."""

    def __init__(self, issues: List[str]) -> None:
        self.issues = list(issues)
        super().__init__("scenario validation failed:\n  " + "\n  ".join(self.issues))


class ConsistencyError(SteamflexError, RuntimeError):
    """Two independent computations of the same quantity disagree."""
