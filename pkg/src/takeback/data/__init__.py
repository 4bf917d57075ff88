"""Bundled instance fixtures."""

from importlib import resources
from pathlib import Path


def fixture_dir(name: str = "middlesex") -> Path:
    """Path to a bundled fixture instance directory."""
    root = resources.files(__package__) / "fixtures" / name
    path = Path(str(root))
    if not path.is_dir():
        raise FileNotFoundError(f"no bundled fixture named {name!r}")
    return path
