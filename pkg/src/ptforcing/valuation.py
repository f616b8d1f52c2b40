"""Valuations and disagreement between conditions and valuations.

A condition disagrees with ``p`` when every split of every path admits a
computation contradicting ``p``.  The complementary class ``S_p`` of splits
that escape every such computation is built as a partition tree.

Each table entry that could contradict ``p`` on the half ``h`` of part ``j``
becomes a *requirement*: a set ``R`` of positions past the stem that must all
lie in ``Z_h`` for the computation to go through.  A split lies in ``S_p``
exactly when it contains no requirement in full.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

from .bitvec import BitString, restrict
from .condition import Condition, Instance
from .oracle import Registry, diag
from .ptree import PartitionTree


@dataclass(frozen=True, order=True)
class Valuation:
    """Finite partial map ``n -> {0,1}``, stored as ascending ``(n, bit)`` pairs."""

    items: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        items = tuple(sorted(self.items))
        ns = [n for n, _ in items]
        if len(set(ns)) != len(ns):
            raise ValueError("valuation assigns an input twice")
        if any(b not in (0, 1) or n < 0 for n, b in items):
            raise ValueError("valuation values must be bits on natural inputs")
        object.__setattr__(self, "items", items)

    @classmethod
    def of(cls, mapping: Mapping[int, int] | None = None) -> Valuation:
        return cls(tuple((mapping or {}).items()))

    @classmethod
    def on(cls, domain: Sequence[int], bits: Sequence[int]) -> Valuation:
        return cls(tuple(zip(domain, bits)))

    @classmethod
    def parse(cls, text: str) -> Valuation:
        body = text.strip()
        if not (body.startswith("{") and body.endswith("}")):
            raise ValueError(f"not a valuation: {text!r}")
        body = body[1:-1].strip()
        if not body:
            return cls()
        items = []
        for part in body.split(","):
            m = re.fullmatch(r"\s*(\d+)\s*:\s*([01])\s*", part)
            if not m:
                raise ValueError(f"bad valuation item {part!r}")
            items.append((int(m.group(1)), int(m.group(2))))
        return cls(tuple(items))

    @property
    def dom(self) -> tuple[int, ...]:
        return tuple(n for n, _ in self.items)

    def as_dict(self) -> dict[int, int]:
        return dict(self.items)

    def __getitem__(self, n: int) -> int:
        for m, b in self.items:
            if m == n:
                return b
        raise KeyError(n)

    def get(self, n: int, default: int | None = None) -> int | None:
        for m, b in self.items:
            if m == n:
                return b
        return default

    def __contains__(self, n: int) -> bool:
        return any(m == n for m, _ in self.items)

    def __len__(self) -> int:
        return len(self.items)

    def restricts(self, other: Valuation) -> bool:
        """``self ⊆ other`` as partial functions."""
        d = other.as_dict()
        return all(d.get(n) == b for n, b in self.items)

    def sort_key(self) -> tuple:
        return (len(self.items), self.dom, tuple(b for _, b in self.items))

    def __str__(self) -> str:
        return "{" + ",".join(f"{n}:{b}" for n, b in self.items) + "}"


def is_correct(p: Valuation, reg: Registry) -> bool:
    """No settled diagonal value agrees with ``p``."""
    return all(diag(reg, n, reg.s_max) != b for n, b in p.items)


def is_settled_correct(p: Valuation, reg: Registry) -> bool:
    """Every ``n ∈ dom p`` has a settled diagonal value different from ``p(n)``."""
    for n, b in p.items:
        v = diag(reg, n, reg.s_max)
        if v is None or v == b:
            return False
    return True


def incompatible(p: Valuation, q: Valuation) -> bool:
    qd = q.as_dict()
    return any(n in qd and qd[n] != b for n, b in p.items)


def valuations_on(domain: Sequence[int]) -> Iterator[Valuation]:
    """All ``2^|domain|`` valuations with exactly this domain, lexicographically."""
    dom = sorted(domain)
    for bits in itertools.product((0, 1), repeat=len(dom)):
        yield Valuation(tuple(zip(dom, bits)))


def all_valuations(bound: int) -> Iterator[Valuation]:
    """Valuations with domain inside ``0..bound``: by domain size, then
    domain, then values."""
    universe = range(bound + 1)
    for size in range(bound + 2):
        for dom in itertools.combinations(universe, size):
            yield from valuations_on(dom)


# -- single functional ------------------------------------------------------------


def functional_disagrees(
    reg: Registry,
    e: int,
    rho: BitString,
    X: BitString,
    p: Valuation,
    mask: BitString,
    C: BitString,
) -> tuple[BitString, int] | None:
    """A ``(Y, n)`` with ``Y ⊆ X`` whose computation halts off ``p(n)``.

    The oracle is ``(Y/ρ)`` restricted to ``mask``.  ``Y`` is the least set
    realizing the first matching entry (inputs ascending, table order).
    """
    if rho.length > X.length:
        raise ValueError("|ρ| exceeds |X|")
    if mask.length < X.length:
        raise ValueError("mask shorter than X")
    rv = rho.value & mask.value
    for n, b in p.items:
        for en in reg.entries(e, n):
            if en.settle > reg.s_max or en.output == b or not en.c_ok(C):
                continue
            need = 0
            ok = True
            for x, bit in en.g_literals():
                if x < rho.length:
                    ok = (rv >> x) & 1 == bit
                elif bit:
                    ok = x < X.length and (X.value >> x) & 1 == 1 and (mask.value >> x) & 1 == 1
                    need |= 1 << x
                if not ok:
                    break
            if ok:
                return BitString(need, X.length), n
    return None


# -- requirements and S_p ---------------------------------------------------------


@dataclass(frozen=True)
class Requirement:
    half: int  # 2j for the A side of part j, 2j+1 for the Ā side
    positions: frozenset[int]
    n: int
    output: int

    @property
    def part(self) -> int:
        return self.half // 2

    @property
    def last(self) -> int:
        return max(self.positions)


def default_parts(c: Condition, e: int, i: int, inst: Instance) -> tuple[int, ...]:
    from .forcing import unforced_parts

    return unforced_parts(c, e, i, inst)


def requirements(
    c: Condition, p: Valuation, e: int, i: int, inst: Instance, U: Iterable[int]
) -> tuple[bool, list[Requirement]]:
    """``(blocked, reqs)``: ``blocked`` means a contradiction needs no position
    past the stem, so ``S_p`` is empty outright.  Supersets are dropped."""
    reg, C, depth = inst.registry, inst.C, c.depth
    found: list[Requirement] = []
    for j in sorted(set(U)):
        sigma = c.stems[j]
        for func, mask, half in ((e, inst.A, 2 * j), (i, inst.A_bar, 2 * j + 1)):
            sv = restrict(sigma, mask).value
            for n, b in p.items:
                for en in reg.entries(func, n):
                    if en.settle > reg.s_max or en.output == b or not en.c_ok(C):
                        continue
                    pos = set()
                    ok = True
                    for x, bit in en.g_literals():
                        if x < sigma.length:
                            ok = (sv >> x) & 1 == bit
                        elif bit:
                            ok = x < depth
                            pos.add(x)
                        if not ok:
                            break
                    if not ok:
                        continue
                    if not pos:
                        return True, []
                    found.append(Requirement(half, frozenset(pos), n, en.output))
    found.sort(key=lambda r: (len(r.positions), r.half, sorted(r.positions)))
    kept: list[Requirement] = []
    for r in found:
        if not any(q.half == r.half and q.positions <= r.positions for q in kept):
            kept.append(r)
    return False, kept


@lru_cache(maxsize=None)
def _splits(col: int, k: int) -> tuple[int, ...]:
    """2k-part columns whose pairwise unions give the k-part column ``col``."""
    opts = []
    for j in range(k):
        if (col >> j) & 1:
            opts.append((1 << (2 * j), 2 << (2 * j), 3 << (2 * j)))
    return tuple(sum(c) for c in itertools.product(*opts)) if opts else (0,)


def build_Sp_tree(
    c: Condition, p: Valuation, e: int, i: int, inst: Instance, U: Iterable[int] | None = None
) -> PartitionTree:
    """The 2k-part tree of splits of paths of ``c.tree`` that escape every
    contradiction of ``p`` on the parts ``U`` (default: the unforced parts)."""
    if U is None:
        U = default_parts(c, e, i, inst)
    P, k, depth = c.tree, c.k, c.depth
    blocked, reqs = requirements(c, p, e, i, inst, U)
    if blocked:
        return PartitionTree.empty(2 * k, depth)
    by_pos: dict[int, list[int]] = {}
    for r, req in enumerate(reqs):
        for x in req.positions:
            by_pos.setdefault(x, []).append(r)

    def step(x: int, key: tuple[int, frozenset[int]]):
        ps, alive = key
        touching = [r for r in by_pos.get(x, ()) if r in alive]
        for col, pn in P.edges(x, ps).items():
            for scol in _splits(col, k):
                nalive = set(alive)
                dead = False
                for r in touching:
                    if (scol >> reqs[r].half) & 1:
                        if x == reqs[r].last:
                            dead = True
                            break
                    else:
                        nalive.discard(r)
                if not dead:
                    yield scol, (pn, frozenset(nalive))

    return PartitionTree.build(2 * k, depth, (0, frozenset(range(len(reqs)))), step)


def sp_nonempty(
    c: Condition, p: Valuation, e: int, i: int, inst: Instance, U: Iterable[int] | None = None
) -> bool:
    """Whether ``S_p`` has a full-depth path, without building the tree.

    Sending each touched position to a single half dominates sending it to
    both, so only one-sided splits are explored.
    """
    if U is None:
        U = default_parts(c, e, i, inst)
    P, depth = c.tree, c.depth
    blocked, reqs = requirements(c, p, e, i, inst, U)
    if blocked:
        return False
    if not reqs:
        return True
    by_pos: dict[int, list[int]] = {}
    for r, req in enumerate(reqs):
        for x in req.positions:
            by_pos.setdefault(x, []).append(r)
    cur: set[tuple[int, frozenset[int]]] = {(0, frozenset(range(len(reqs))))}
    for x in range(depth):
        if any(not alive for _, alive in cur):
            return True
        at_x = by_pos.get(x, ())
        nxt: set[tuple[int, frozenset[int]]] = set()
        for ps, alive in cur:
            touching = [r for r in at_x if r in alive]
            for col, pn in P.edges(x, ps).items():
                if not touching:
                    nxt.add((pn, alive))
                    continue
                parts = sorted({reqs[r].part for r in touching if (col >> reqs[r].part) & 1})
                base = alive - {r for r in touching if not (col >> reqs[r].part) & 1}
                for sides in itertools.product((0, 1), repeat=len(parts)):
                    chosen = {2 * j + s for j, s in zip(parts, sides)}
                    nalive = set(base)
                    dead = False
                    for r in touching:
                        if not (col >> reqs[r].part) & 1:
                            continue
                        if reqs[r].half in chosen:
                            if x == reqs[r].last:
                                dead = True
                                break
                        else:
                            nalive.discard(r)
                    if not dead:
                        nxt.add((pn, frozenset(nalive)))
        cur = _drop_dominated(nxt)
        if not cur:
            return False
    return bool(cur)


def _drop_dominated(states: set[tuple[int, frozenset[int]]]) -> set[tuple[int, frozenset[int]]]:
    """Keep, per tree state, only the minimal sets of live requirements."""
    by_state: dict[int, list[frozenset[int]]] = {}
    for ps, alive in states:
        by_state.setdefault(ps, []).append(alive)
    out = set()
    for ps, sets in by_state.items():
        sets.sort(key=len)
        kept: list[frozenset[int]] = []
        for s in sets:
            if not any(q <= s for q in kept):
                kept.append(s)
        out.update((ps, s) for s in kept)
    return out


def condition_disagrees(
    c: Condition, p: Valuation, e: int, i: int, inst: Instance, U: Iterable[int] | None = None
) -> bool:
    return not sp_nonempty(c, p, e, i, inst, U)


# -- the finitized set E ------------------------------------------------------------


@dataclass(frozen=True)
class DisagreementEnumeration:
    discovered: tuple[Valuation, ...]
    depth_used: int

    def __contains__(self, p: Valuation) -> bool:
        return p in self.discovered

    def __len__(self) -> int:
        return len(self.discovered)

    def __iter__(self) -> Iterator[Valuation]:
        return iter(self.discovered)


def enumerate_E(
    c: Condition,
    e: int,
    i: int,
    inst: Instance,
    U: Iterable[int] | None = None,
    domain_bound: int | None = None,
) -> DisagreementEnumeration:
    """Valuations with domain inside ``0..domain_bound`` whose ``S_p`` is empty.

    ``S_q ⊆ S_p`` whenever ``p ⊆ q``, so extensions of a member are members.
    """
    if U is None:
        U = default_parts(c, e, i, inst)
    U = tuple(U)
    bound = inst.domain_bound if domain_bound is None else domain_bound
    found: list[Valuation] = []
    for p in all_valuations(bound):
        if any(q.restricts(p) for q in found) or not sp_nonempty(c, p, e, i, inst, U):
            found.append(p)
    return DisagreementEnumeration(tuple(found), c.depth)

