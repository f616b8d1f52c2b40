"""Finite-horizon simulator for tree forcing with partition classes."""

from .bitvec import BitString, GroundSets, bs
from .condition import Condition, Instance
from .driver import Schedule, Trace, check_trace, run_construction, verify_requirements
from .forcing import dichotomy_search, extends, force_R_extension, satisfies
from .oracle import Entry, Registry, make_registry
from .ptree import PartitionTree, cross_codes, cross_trees
from .valuation import Valuation

__all__ = [
    "BitString",
    "Condition",
    "Entry",
    "GroundSets",
    "Instance",
    "PartitionTree",
    "Registry",
    "Schedule",
    "Trace",
    "Valuation",
    "bs",
    "check_trace",
    "cross_codes",
    "cross_trees",
    "dichotomy_search",
    "extends",
    "force_R_extension",
    "make_registry",
    "run_construction",
    "satisfies",
    "verify_requirements",
]
