"""Bundled reference models."""
from importlib.resources import files


def path(name: str = "atm.ikm") -> str:
    return str(files(__name__) / name)


def text(name: str = "atm.ikm") -> str:
    return (files(__name__) / name).read_text(encoding="utf-8")
