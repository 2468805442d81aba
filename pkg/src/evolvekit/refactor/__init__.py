"""Behaviour-preserving refactorings with their equivalence oracles."""

from .components import flattened_connectivity, locality_violations, pull_up, push_down
from .statechart import Chart, flatten_statechart, simulate

__all__ = ["Chart", "flatten_statechart", "flattened_connectivity", "locality_violations",
           "pull_up", "push_down", "simulate"]
