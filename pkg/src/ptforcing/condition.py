"""Tree-forcing conditions and the fixed data a construction runs against."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .bitvec import BitString, GroundSets
from .oracle import Registry
from .ptree import PartitionTree


class ConditionError(ValueError):
    pass


@dataclass(frozen=True)
class Condition:
    """``(k, σ_0, …, σ_{k-1}, P)`` with ``P`` a depth-bounded partition tree.

    ``P`` is kept pruned, so every node extends to a full-depth path.
    """

    stems: tuple[BitString, ...]
    tree: PartitionTree

    def __post_init__(self) -> None:
        object.__setattr__(self, "stems", tuple(self.stems))
        if self.tree.k != len(self.stems):
            raise ConditionError(f"{len(self.stems)} stems for a {self.tree.k}-part tree")
        for j, s in enumerate(self.stems):
            if s.length > self.tree.depth:
                raise ConditionError(f"stem {j} longer than the horizon {self.tree.depth}")
        tree = self.tree.pruned()
        if tree.is_empty:
            raise ConditionError("partition class is empty at full depth")
        object.__setattr__(self, "tree", tree)

    @property
    def k(self) -> int:
        return len(self.stems)

    @property
    def depth(self) -> int:
        return self.tree.depth

    @classmethod
    def initial(cls, depth: int) -> Condition:
        """``c_0 = (1, ε, {ω})`` at the given horizon."""
        return cls((BitString(0, 0),), PartitionTree.full(1, depth))

    def replace_stem(self, j: int, stem: BitString, tree: PartitionTree) -> Condition:
        stems = list(self.stems)
        stems[j] = stem
        return Condition(tuple(stems), tree)

    def summary(self) -> dict:
        return {"k": self.k, "stems": [str(s) for s in self.stems], "paths": self.tree.count_paths()}

    def to_json(self) -> dict:
        return {"stems": [str(s) for s in self.stems], "tree": self.tree.to_json()}

    @classmethod
    def from_json(cls, data: dict) -> Condition:
        return cls(tuple(BitString.parse(s) for s in data["stems"]), PartitionTree.from_json(data["tree"]))


@dataclass(frozen=True)
class Instance:
    """Registry, ground sets and search budgets shared by the forcing steps.

    ``domain_bound`` fixes both the valuation domains searched and the tested
    input domain ``0..domain_bound`` on which totality is judged.
    """

    registry: Registry
    grounds: GroundSets
    domain_bound: int = 3
    max_parts: int = 64

    @property
    def domain(self) -> range:
        return range(self.domain_bound + 1)

    @property
    def A(self) -> BitString:
        return self.grounds.A

    @property
    def A_bar(self) -> BitString:
        return self.grounds.A_bar

    @property
    def C(self) -> BitString:
        return self.grounds.C

    def check_horizon(self, depth: int) -> None:
        if depth > self.grounds.universe_size:
            raise ConditionError(f"horizon {depth} exceeds universe {self.grounds.universe_size}")


def identity_witness(k: int) -> tuple[int, ...]:
    return tuple(range(k))


def compose(f: Sequence[int], g: Sequence[int]) -> tuple[int, ...]:
    """``f∘g``: for ``e`` extending ``d`` via ``g`` and ``d`` extending ``c`` via ``f``."""
    return tuple(f[x] for x in g)
