"""Path helpers for packaged resources."""

from __future__ import annotations

from pathlib import Path

DEFAULT_PRESETS_NAME = "presets.yaml"


def package_root() -> Path:
    return Path(__file__).resolve().parents[1]


def default_presets_path() -> Path:
    return package_root() / "data" / DEFAULT_PRESETS_NAME


def resolve_relative(path_str: str, base_dir: Path) -> Path:
    """Resolve a config-relative path; absolute paths are returned unchanged."""
    p = Path(path_str).expanduser()
    if p.is_absolute():
        return p
    return (base_dir / p).resolve()
