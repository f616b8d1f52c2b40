"""Finite stand-ins for {0,1}-valued oracle functionals and the diagonal.

A functional is a table of entries.  An entry says: on input ``n``, once the
stage reaches ``settle``, output ``output`` provided the oracle matches every
constraint ``(position, side, bit)``; ``side`` is ``G`` (the generic-side
oracle) or ``C`` (the fixed side oracle).  Evaluation is therefore monotone in
the stage and depends only on the constrained positions (use-monotone).

Registry text format, one record per line (``#`` starts a comment)::

    S <s_max>
    F <e>                                  # declares an empty table
    F <e> <n> <settle> <output> [pos:side:bit,...]
    D <n> <value> <settle>
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .bitvec import BitString

SIDES = ("G", "C")


class RegistryError(ValueError):
    pass


@dataclass(frozen=True)
class Entry:
    n: int
    constraints: tuple[tuple[int, str, int], ...]
    settle: int
    output: int
    g_ones: int = field(init=False, repr=False, compare=False)
    g_zeros: int = field(init=False, repr=False, compare=False)
    c_ones: int = field(init=False, repr=False, compare=False)
    c_zeros: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        cons = tuple(sorted(self.constraints))
        object.__setattr__(self, "constraints", cons)
        object.__setattr__(self, "g_ones", _mask(cons, "G", 1))
        object.__setattr__(self, "g_zeros", _mask(cons, "G", 0))
        object.__setattr__(self, "c_ones", _mask(cons, "C", 1))
        object.__setattr__(self, "c_zeros", _mask(cons, "C", 0))

    def matches(self, g_value: int, c_value: int) -> bool:
        return (
            g_value & self.g_ones == self.g_ones
            and g_value & self.g_zeros == 0
            and c_value & self.c_ones == self.c_ones
            and c_value & self.c_zeros == 0
        )

    def c_ok(self, C: BitString) -> bool:
        return C.value & self.c_ones == self.c_ones and C.value & self.c_zeros == 0

    def g_literals(self) -> list[tuple[int, int]]:
        return [(x, b) for x, s, b in self.constraints if s == "G"]

    def compatible_with(self, other: Entry) -> bool:
        bits = {(x, s): b for x, s, b in self.constraints}
        return all(bits.get((x, s), b) == b for x, s, b in other.constraints)

    def to_line(self, e: int) -> str:
        cons = ",".join(f"{x}:{s}:{b}" for x, s, b in self.constraints)
        return f"F {e} {self.n} {self.settle} {self.output}" + (f" {cons}" if cons else "")


def _mask(constraints, side: str, bit: int) -> int:
    m = 0
    for x, s, b in constraints:
        if s == side and b == bit:
            m |= 1 << x
    return m


@dataclass(frozen=True)
class FunctionalTable:
    index: int
    entries: tuple[Entry, ...] = ()

    def for_input(self, n: int) -> tuple[Entry, ...]:
        return tuple(en for en in self.entries if en.n == n)


@dataclass(frozen=True)
class DiagonalTable:
    halts: Mapping[int, tuple[int, int]] = field(default_factory=dict)  # n -> (value, settle)

    def settled(self, stage: int) -> dict[int, int]:
        return {n: v for n, (v, s) in self.halts.items() if s <= stage}


@dataclass(frozen=True)
class Registry:
    functionals: Mapping[int, FunctionalTable]
    diagonal: DiagonalTable
    s_max: int
    universe_size: int | None = None

    def __post_init__(self) -> None:
        by_input: dict[tuple[int, int], tuple[Entry, ...]] = {}
        for e, table in self.functionals.items():
            for en in table.entries:
                by_input[(e, en.n)] = by_input.get((e, en.n), ()) + (en,)
        object.__setattr__(self, "_by_input", by_input)

    @property
    def indices(self) -> list[int]:
        return sorted(self.functionals)

    def entries(self, e: int, n: int) -> tuple[Entry, ...]:
        if e not in self.functionals:
            raise RegistryError(f"unknown functional index {e}")
        return self._by_input.get((e, n), ())  # type: ignore[attr-defined]

    def diag_value(self, n: int) -> int | None:
        return diag(self, n, self.s_max)

    # -- text format -------------------------------------------------------------
    def dumps(self) -> str:
        lines = [f"S {self.s_max}"]
        for e in self.indices:
            table = self.functionals[e]
            if not table.entries:
                lines.append(f"F {e}")
            lines.extend(en.to_line(e) for en in table.entries)
        for n in sorted(self.diagonal.halts):
            v, s = self.diagonal.halts[n]
            lines.append(f"D {n} {v} {s}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, universe_size: int | None = None) -> Registry:
        s_max = None
        tables: dict[int, list[Entry]] = {}
        halts: dict[int, tuple[int, int]] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            try:
                if tok[0] == "S" and len(tok) == 2:
                    if s_max is not None:
                        raise RegistryError("duplicate S line")
                    s_max = int(tok[1])
                elif tok[0] == "F" and len(tok) == 2:
                    tables.setdefault(int(tok[1]), [])
                elif tok[0] == "F" and len(tok) in (5, 6):
                    e, n, settle, out = map(int, tok[1:5])
                    cons = []
                    if len(tok) == 6 and tok[5] != "-":
                        for item in tok[5].split(","):
                            pos, side, bit = item.split(":")
                            cons.append((int(pos), side, int(bit)))
                    tables.setdefault(e, []).append(Entry(n, tuple(cons), settle, out))
                elif tok[0] == "D" and len(tok) == 4:
                    n, v, settle = map(int, tok[1:])
                    if n in halts:
                        raise RegistryError(f"duplicate diagonal entry for {n}")
                    halts[n] = (v, settle)
                else:
                    raise RegistryError(f"unrecognized record {line!r}")
            except ValueError as exc:
                raise RegistryError(f"line {lineno}: {exc}") from exc
        if s_max is None:
            raise RegistryError("missing S line")
        reg = cls(
            {e: FunctionalTable(e, tuple(en)) for e, en in tables.items()},
            DiagonalTable(halts),
            s_max,
            universe_size,
        )
        problems = validate_registry(reg)
        if problems:
            raise RegistryError("invalid registry:\n  " + "\n  ".join(problems))
        return reg


def eval_functional(
    reg: Registry, e: int, g_side: BitString, c_side: BitString, n: int, stage: int
) -> int | None:
    """Output of functional ``e`` on input ``n`` by ``stage``, or ``None``
    if nothing has converged yet."""
    if stage > reg.s_max:
        raise RegistryError(f"stage {stage} beyond s_max={reg.s_max}")
    gv, cv = g_side.value, c_side.value
    for en in reg.entries(e, n):
        if en.settle <= stage and en.matches(gv, cv):
            return en.output
    return None


def diag(reg: Registry, n: int, stage: int) -> int | None:
    """The diagonal value at ``n`` if it has settled by ``stage``."""
    if stage > reg.s_max:
        raise RegistryError(f"stage {stage} beyond s_max={reg.s_max}")
    hit = reg.diagonal.halts.get(n)
    if hit is not None and hit[1] <= stage:
        return hit[0]
    return None


def validate_registry(reg: Registry) -> list[str]:
    """Every determinism violation and out-of-range field; empty when valid."""
    problems = []
    if reg.s_max < 0:
        problems.append(f"s_max={reg.s_max} is negative")
    for e in reg.indices:
        table = reg.functionals[e]
        if table.index != e:
            problems.append(f"functional stored under {e} has index {table.index}")
        for en in table.entries:
            if en.output not in (0, 1):
                problems.append(f"F{e} n={en.n}: output {en.output} not in {{0,1}}")
            if en.n < 0 or en.settle < 0:
                problems.append(f"F{e} n={en.n}: negative input or settle stage")
            seen: dict[tuple[int, str], int] = {}
            for x, side, b in en.constraints:
                if side not in SIDES or b not in (0, 1) or x < 0:
                    problems.append(f"F{e} n={en.n}: malformed constraint {x}:{side}:{b}")
                elif reg.universe_size is not None and x >= reg.universe_size:
                    problems.append(f"F{e} n={en.n}: position {x} outside universe {reg.universe_size}")
                if seen.setdefault((x, side), b) != b:
                    problems.append(f"F{e} n={en.n}: contradictory constraints at {x}:{side}")
        by_n: dict[int, list[Entry]] = {}
        for en in table.entries:
            by_n.setdefault(en.n, []).append(en)
        for n, ens in sorted(by_n.items()):
            for a, b in itertools.combinations(ens, 2):
                if a.output != b.output and a.compatible_with(b):
                    problems.append(
                        f"F{e} n={n}: entries {a.to_line(e)!r} and {b.to_line(e)!r} conflict"
                    )
    for n, (v, s) in sorted(reg.diagonal.halts.items()):
        if v not in (0, 1):
            problems.append(f"D{n}: value {v} not in {{0,1}}")
        if s < 1:
            problems.append(f"D{n}: settle stage {s} < 1")
    return problems


def make_registry(
    tables: Mapping[int, Iterable[Entry]],
    diagonal: Mapping[int, tuple[int, int]] | None = None,
    s_max: int = 10,
    universe_size: int | None = None,
) -> Registry:
    reg = Registry(
        {e: FunctionalTable(e, tuple(ens)) for e, ens in tables.items()},
        DiagonalTable(dict(diagonal or {})),
        s_max,
        universe_size,
    )
    problems = validate_registry(reg)
    if problems:
        raise RegistryError("invalid registry:\n  " + "\n  ".join(problems))
    return reg


def random_registry(
    rng: random.Random,
    indices: Iterable[int],
    universe_size: int,
    n_max: int,
    *,
    s_max: int = 8,
    diag_facts: int | None = None,
    max_positions: int = 2,
    c_side_prob: float = 0.25,
    fill: float = 0.7,
) -> Registry:
    """A conflict-free random registry.

    For each functional and input a small position set is drawn and entries
    are taken from distinct full assignments of it; distinct full assignments
    of one set are mutually unsatisfiable, so determinism holds by design.
    """
    tables: dict[int, list[Entry]] = {}
    for e in indices:
        ens: list[Entry] = []
        for n in range(n_max + 1):
            if rng.random() > fill:
                continue
            width = rng.randint(0, max_positions)
            slots = set()
            while len(slots) < width:
                side = "C" if rng.random() < c_side_prob else "G"
                slots.add((rng.randrange(universe_size), side))
            slots = sorted(slots)
            for bits in itertools.product((0, 1), repeat=len(slots)):
                if rng.random() < fill:
                    cons = tuple((x, s, b) for (x, s), b in zip(slots, bits))
                    ens.append(Entry(n, cons, rng.randint(0, s_max + 1), rng.randint(0, 1)))
        tables[e] = ens
    halts = {}
    count = rng.randint(0, n_max + 1) if diag_facts is None else diag_facts
    for n in rng.sample(range(n_max + 1), min(count, n_max + 1)):
        halts[n] = (rng.randint(0, 1), rng.randint(1, s_max))
    return make_registry(tables, halts, s_max, universe_size)
