"""Minimal logging helpers."""

from __future__ import annotations

import sys
from typing import Any

_VERBOSE = False


def eprint(*args: Any, **kwargs: Any) -> None:
    """Print to stderr."""
    print(*args, file=sys.stderr, **kwargs)


def set_verbose(enabled: bool) -> None:
    global _VERBOSE
    _VERBOSE = bool(enabled)


def is_verbose() -> bool:
    return _VERBOSE


def vprint(*args: Any, **kwargs: Any) -> None:
    """Print to stderr only when verbose output is enabled."""
    if _VERBOSE:
        eprint(*args, **kwargs)
