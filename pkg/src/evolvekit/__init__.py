"""evolvekit: metamodel-driven model evolution.

Conformance checking, constraint evaluation with counterexamples, model
matching/diff/merge, model migration with a small change language, rule
graph migration and behaviour-preserving refactorings.
"""

from .errors import EvolveError
from .model import (ConformanceReport, Metamodel, MLink, MObject, Model, ModelBuilder,
                    check_conformance, load_metamodel, load_model, save_metamodel, save_model)

__version__ = "0.1.0"

__all__ = ["ConformanceReport", "EvolveError", "MLink", "MObject", "Metamodel", "Model",
           "ModelBuilder", "check_conformance", "load_metamodel", "load_model",
           "save_metamodel", "save_model"]
