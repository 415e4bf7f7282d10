"""Builtin scenarios and the scenario file format."""

from pathlib import Path

from .builtins import BUILTINS, SPLIT_BUILTINS, builtin, builtin_names, k8s_quota
from .fileformat import ParseError, dumps, load_scenario, loads, save_scenario

DATA_DIR = Path(__file__).with_name("data")


def resolve(name_or_path: str):
    """A builtin by name, else a scenario file path."""
    if name_or_path in BUILTINS:
        return builtin(name_or_path)
    path = Path(name_or_path)
    if path.is_file():
        return load_scenario(path)
    raise KeyError(f"no builtin named {name_or_path!r} and no such file")


__all__ = [
    "BUILTINS", "DATA_DIR", "ParseError", "SPLIT_BUILTINS", "builtin", "builtin_names",
    "dumps", "k8s_quota", "load_scenario", "loads", "resolve", "save_scenario",
]
