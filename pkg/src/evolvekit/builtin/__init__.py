"""Metamodels shipped with the package (component models and statecharts)."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from ..model import Metamodel, load_metamodel


@lru_cache(maxsize=None)
def builtin_metamodel(name: str) -> Metamodel:
    """Load ``components``, ``statechart`` or ``statechart_flat``."""
    return load_metamodel(resources.files(__package__).joinpath(f"{name}.mm.json").read_bytes())


def components_mm() -> Metamodel:
    return builtin_metamodel("components")


def statechart_mm() -> Metamodel:
    return builtin_metamodel("statechart")


def flat_statechart_mm() -> Metamodel:
    return builtin_metamodel("statechart_flat")
