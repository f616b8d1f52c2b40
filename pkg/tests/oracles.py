"""Brute-force reference implementations and random generators for tests.

Everything here enumerates sets and paths directly, so it is only usable on
universes of a handful of positions.
"""

from __future__ import annotations

import itertools
import random
from typing import Iterable, Iterator, Sequence

from ptforcing.bitvec import BitString, columns, from_columns
from ptforcing.condition import Condition, Instance
from ptforcing.forcing import requirement_witness
from ptforcing.oracle import Registry, eval_functional
from ptforcing.ptree import PartitionTree
from ptforcing.valuation import Valuation


def submasks(m: int) -> Iterator[int]:
    sub = m
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & m


def splits(X: int) -> Iterator[tuple[int, int]]:
    """All ``(Z0, Z1)`` with ``Z0 ∪ Z1 = X``."""
    for Z0 in submasks(X):
        for W in submasks(Z0):
            yield Z0, (X & ~Z0) | W


def out(reg: Registry, e: int, g: int, C: BitString, n: int, N: int) -> int | None:
    return eval_functional(reg, e, BitString(g, N), C, n, reg.s_max)


def paths(T: PartitionTree) -> list[list[int]]:
    return [columns(code, T.k) for code in T.iter_paths()]


def part_mask(cols: Sequence[int], j: int) -> int:
    return sum(1 << x for x, col in enumerate(cols) if (col >> j) & 1)


# -- single functional ------------------------------------------------------------------


def functional_disagrees(
    reg: Registry, e: int, rho: BitString, X: BitString, p: Valuation, mask: BitString, C: BitString
) -> bool:
    low = (1 << rho.length) - 1
    for Y in submasks(X.value):
        g = ((Y & ~low) | rho.value) & mask.value
        for n, b in p.items:
            v = out(reg, e, g, C, n, mask.length)
            if v is not None and v != b:
                return True
    return False


def not_total(reg: Registry, e: int, g: int, C: BitString, domain: Iterable[int], N: int) -> bool:
    return any(out(reg, e, g, C, n, N) is None for n in domain)


# -- conditions -------------------------------------------------------------------------


def _refuted(reg, func, Z: int, sigma: BitString, mask: BitString, C, p: Valuation, N: int) -> bool:
    """Some ``Y`` makes ``func`` on ``(Y∩Z)/σ^mask`` halt off ``p``."""
    low = (1 << sigma.length) - 1
    head = sigma.value & mask.value
    for Y in submasks(Z & ~low):
        g = Y | head
        for n, b in p.items:
            v = out(reg, func, g, C, n, N)
            if v is not None and v != b:
                return True
    return False


def split_refuted(c: Condition, j: int, Z0: int, Z1: int, p, e, i, inst: Instance) -> bool:
    N = inst.grounds.universe_size
    reg, sigma = inst.registry, c.stems[j]
    return _refuted(reg, e, Z0, sigma, inst.A, inst.C, p, N) or _refuted(reg, i, Z1, sigma, inst.A_bar, inst.C, p, N)


def condition_disagrees(c: Condition, p: Valuation, e: int, i: int, inst: Instance, U: Iterable[int]) -> bool:
    """Every path and every split of it is refuted on some part of ``U``.

    Parts split independently, so "for all splits, some part" is checked as
    "some part, for all of its splits" (a product of independent choices).
    """
    U = sorted(U)
    for cols in paths(c.tree):
        if not any(
            all(split_refuted(c, j, Z0, Z1, p, e, i, inst) for Z0, Z1 in splits(part_mask(cols, j)))
            for j in U
        ):
            return False
    return True


def condition_disagrees_joint(c: Condition, p: Valuation, e: int, i: int, inst: Instance, U: Iterable[int]) -> bool:
    """The same quantifiers without the factorization: joint splits of all parts."""
    U = sorted(U)
    for cols in paths(c.tree):
        per_part = [list(splits(part_mask(cols, j))) for j in range(c.k)]
        for combo in itertools.product(*per_part):
            if not any(split_refuted(c, j, *combo[j], p, e, i, inst) for j in U):
                return False
    return True


def sp_paths(c: Condition, p: Valuation, e: int, i: int, inst: Instance, U: Iterable[int]) -> set[BitString]:
    """Codes of all splits (of all paths) escaping every refutation on ``U``."""
    U = set(U)
    k, depth = c.k, c.depth
    found = set()
    for cols in paths(c.tree):
        per_part = [list(splits(part_mask(cols, j))) for j in range(k)]
        for combo in itertools.product(*per_part):
            if any(split_refuted(c, j, *combo[j], p, e, i, inst) for j in U):
                continue
            halves = [z for pair in combo for z in pair]
            scols = [sum(((halves[h] >> x) & 1) << h for h in range(2 * k)) for x in range(depth)]
            found.add(from_columns(scols, 2 * k))
    return found


def satisfies_on(G: BitString, c: Condition, i: int) -> bool:
    sigma = c.stems[i]
    if not sigma.is_prefix_of(G):
        return False
    low = (1 << sigma.length) - 1
    return any((G.value & ~low) & ~part_mask(cols, i) == 0 for cols in paths(c.tree))


def forces_R(c: Condition, j: int, e: int, i: int, inst: Instance) -> bool:
    """Sweep all ``G`` of the horizon's length."""
    for g in range(1 << c.depth):
        G = BitString(g, c.depth)
        if satisfies_on(G, c, j) and requirement_witness(G, e, i, inst) is None:
            return False
    return True


def extends(d: Condition, c: Condition, f: Sequence[int]) -> bool:
    """Per part: every path of ``d`` has a path of ``c`` under which the part's
    Mathias condition extends the mapped one."""
    cpaths = paths(c.tree)
    for cols in paths(d.tree):
        for i, j in enumerate(f):
            tau, sigma = d.stems[i], c.stems[j]
            if not sigma.is_prefix_of(tau):
                return False
            lt, ls = (1 << tau.length) - 1, (1 << sigma.length) - 1
            Y = (part_mask(cols, i) & ~lt) | tau.value
            if not any(Y & ~((part_mask(x, j) & ~ls) | sigma.value) == 0 for x in cpaths):
                return False
    return True


def acceptable(c: Condition, A: BitString, t: int) -> set[int]:
    out_ = set()
    for cols in paths(c.tree):
        for i in range(c.k):
            sigma = c.stems[i]
            low = (1 << sigma.length) - 1
            Xi = (part_mask(cols, i) & ~low) | sigma.value
            if (Xi & A.value).bit_count() >= t and (Xi & ~A.value).bit_count() >= t:
                out_.add(i)
    return out_


# -- random instances ---------------------------------------------------------------------


def random_code(rng: random.Random, k: int, depth: int) -> BitString:
    return from_columns([rng.randrange(1, 1 << k) for _ in range(depth)], k)


def random_tree(rng: random.Random, k: int, depth: int, max_paths: int = 4) -> PartitionTree:
    codes = [random_code(rng, k, depth) for _ in range(rng.randint(1, max_paths))]
    return PartitionTree.from_paths(k, depth, codes)


def random_condition(rng: random.Random, k: int, depth: int, max_paths: int = 3, max_stem: int | None = None) -> Condition:
    top = depth if max_stem is None else min(depth, max_stem)
    stems = tuple(BitString.random(rng.randint(0, top), rng) for _ in range(k))
    return Condition(stems, random_tree(rng, k, depth, max_paths))


def random_valuation(rng: random.Random, bound: int, max_size: int) -> Valuation:
    dom = rng.sample(range(bound + 1), rng.randint(0, min(max_size, bound + 1)))
    return Valuation(tuple((n, rng.randint(0, 1)) for n in dom))


def random_total_registry(rng: random.Random, N: int, indices=(0, 1), n_max: int = 3, s_max: int = 6) -> Registry:
    """Every functional halts on every input below ``n_max`` for every oracle."""
    from ptforcing.oracle import Entry, make_registry

    tables = {}
    for e in indices:
        ens = []
        for n in range(n_max + 1):
            slots = sorted(rng.sample(range(N), rng.randint(0, min(2, N))))
            for bits in itertools.product((0, 1), repeat=len(slots)):
                cons = tuple((x, "G", b) for x, b in zip(slots, bits))
                ens.append(Entry(n, cons, rng.randint(0, s_max), rng.randint(0, 1)))
        tables[e] = ens
    halts = {n: (rng.randint(0, 1), rng.randint(1, s_max)) for n in rng.sample(range(n_max + 1), rng.randint(0, n_max + 1))}
    return make_registry(tables, halts, s_max, N)
