"""Bundled case-study models."""

from importlib import resources

from ..model import SBSystem, parse_model

NAMES = ("atv_s0", "atv_s1", "bone_s0", "bone_s1")


def path(name: str):
    """Filesystem path of a bundled model file."""
    if name not in NAMES:
        raise KeyError(f"unknown bundled model {name!r}; have {NAMES}")
    return resources.files(__package__) / f"{name}.sb"


def load(name: str) -> SBSystem:
    """Parse a bundled model."""
    return parse_model(path(name).read_text(encoding="utf-8"))
