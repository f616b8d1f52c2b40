"""Extension, satisfaction and forcing for tree conditions, and the two-case
procedure that forces a diagonal-avoidance requirement.

The requirement for a pair ``(e, i)`` holds of ``G`` at the horizon when, on
the tested domain, ``Φ_e`` with oracle ``G∩A`` (or ``Φ_i`` with ``G∩Ā``)
either hits a settled diagonal value or fails to converge somewhere.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import ClassVar, Iterable, Sequence

from .bitvec import BitString, columns, from_columns, overwrite, restrict, subset_leq
from .condition import Condition, Instance, compose, identity_witness
from .oracle import Entry, diag, eval_functional
from .ptree import PartitionTree, cross_part_index, cross_trees, pair_list, refine_below
from .valuation import (
    DisagreementEnumeration,
    Valuation,
    build_Sp_tree,
    enumerate_E,
    incompatible,
    is_correct,
    is_settled_correct,
    valuations_on,
)


class ForcingError(RuntimeError):
    pass


class PartBudgetExceeded(ForcingError):
    pass


# -- Mathias conditions ------------------------------------------------------------


@dataclass(frozen=True)
class MathiasCondition:
    stem: BitString
    reservoir: BitString

    def __post_init__(self) -> None:
        if self.stem.length > self.reservoir.length:
            raise ValueError("stem longer than reservoir")


def mathias_extends(d: MathiasCondition, c: MathiasCondition) -> bool:
    if d.reservoir.length != c.reservoir.length:
        raise ValueError("conditions over different horizons")
    return c.stem.is_prefix_of(d.stem) and subset_leq(
        overwrite(d.reservoir, d.stem), overwrite(c.reservoir, c.stem)
    )


# -- extension and satisfaction ------------------------------------------------------


def refines_part(
    Q: PartitionTree, tau: BitString, i: int, P: PartitionTree, sigma: BitString, j: int
) -> bool:
    """Every path ``Y`` of ``Q`` has a path ``X`` of ``P`` with ``Y_i/τ ⊆ X_j/σ``."""
    if Q.is_empty:
        return True
    if P.is_empty:
        return False
    cur = {(0, frozenset([0]))}
    for x in range(Q.depth):
        nxt = set()
        for q, ps in cur:
            for col, qn in Q.edges(x, q).items():
                y = tau.bit(x) if x < tau.length else (col >> i) & 1
                if y and x < sigma.length:
                    y = 0 if sigma.bit(x) else 2  # 2: no X can cover it
                if y == 2:
                    return False
                nps = frozenset(
                    pn for p in ps for pc, pn in P.edges(x, p).items() if not y or (pc >> j) & 1
                )
                if not nps:
                    return False
                nxt.add((qn, nps))
        cur = nxt
    return True


def extends(d: Condition, c: Condition, f: Sequence[int]) -> bool:
    """Each part ``i`` of ``d`` refines part ``f(i)`` of ``c``, checked part by part."""
    if len(f) != d.k or any(not 0 <= x < c.k for x in f):
        return False
    if d.depth != c.depth:
        raise ValueError("conditions over different horizons")
    for i, j in enumerate(f):
        if not c.stems[j].is_prefix_of(d.stems[i]):
            return False
        if not refines_part(d.tree, d.stems[i], i, c.tree, c.stems[j], j):
            return False
    return True


def satisfies_on(G: BitString, c: Condition, i: int) -> bool:
    if G.length != c.depth:
        raise ValueError(f"|G|={G.length} differs from the horizon {c.depth}")
    sigma = c.stems[i]
    if not sigma.is_prefix_of(G):
        return False
    lo = sigma.length
    return c.tree.exists_path(lambda x, col: x < lo or not G.bit(x) or (col >> i) & 1)


def satisfies(G: BitString, c: Condition) -> int | None:
    for i in range(c.k):
        if satisfies_on(G, c, i):
            return i
    return None


# -- Q_m ------------------------------------------------------------------------------


def forces_Qm(c: Condition, i: int, A: BitString, m: int) -> bool:
    sigma = c.stems[i]
    inside = restrict(sigma, A).count()
    return inside >= m and sigma.count() - inside >= m


def _count_bit(c: Condition, i: int, x: int, col: int) -> int:
    sigma = c.stems[i]
    return sigma.bit(x) if x < sigma.length else (col >> i) & 1


def _good_count_states(c: Condition, i: int, A: BitString, t: int) -> list[set[tuple[int, int, int]]]:
    """Per level, the states ``(tree state, |A| count, |Ā| count)`` (counts capped
    at ``t``) that are reachable and extend to a path with both counts ``≥ t``."""
    P, depth = c.tree, c.depth
    reach: list[set[tuple[int, int, int]]] = [{(0, 0, 0)}]
    for x in range(depth):
        inA = A.bit(x)
        nxt = set()
        for s, a, b in reach[-1]:
            for col, n in P.edges(x, s).items():
                if _count_bit(c, i, x, col):
                    nxt.add((n, min(t, a + inA), min(t, b + 1 - inA)))
                else:
                    nxt.add((n, a, b))
        reach.append(nxt)
    good = [set() for _ in range(depth + 1)]
    good[depth] = {st for st in reach[depth] if st[1] >= t and st[2] >= t}
    for x in range(depth - 1, -1, -1):
        inA = A.bit(x)
        for s, a, b in reach[x]:
            for col, n in P.edges(x, s).items():
                if _count_bit(c, i, x, col):
                    st = (n, min(t, a + inA), min(t, b + 1 - inA))
                else:
                    st = (n, a, b)
                if st in good[x + 1]:
                    good[x].add((s, a, b))
                    break
    return good


def acceptable_parts(c: Condition, A: BitString, t: int) -> tuple[int, ...]:
    """Parts ``i`` with a path whose ``X_i/σ_i`` has ``≥ t`` elements in ``A``
    and ``≥ t`` in ``Ā`` below the horizon."""
    if t < 1:
        raise ValueError("threshold must be at least 1")
    return tuple(i for i in range(c.k) if _good_count_states(c, i, A, t)[0])


def force_Qm_extension(c: Condition, i: int, A: BitString, m: int, t: int = 0) -> Condition:
    """Replace ``σ_i`` by the shortest ``τ ⪰ σ_i`` with ``m`` elements on each
    side of ``A``, taken along a path on which part ``i`` keeps threshold ``t``."""
    cap = max(m, t)
    good = _good_count_states(c, i, A, t) if t else None
    P, sigma = c.tree, c.stems[i]
    level: dict[tuple[int, int, int], tuple | None] = {(0, 0, 0): None}
    if good is not None and (0, 0, 0) not in good[0]:
        raise ForcingError(f"part {i} is not acceptable at threshold {t}")
    history = [level]
    for x in range(c.depth + 1):
        if x >= sigma.length:
            for st in level:
                if st[1] >= m and st[2] >= m and (good is None or _meets(st, t, good[x])):
                    cols = _trace_back(history, st)
                    tau = BitString.from_bits(_count_bit(c, i, y, col) for y, col in enumerate(cols))
                    tree = refine_below(P, i, tau, "prefix", sigma)
                    return c.replace_stem(i, tau, tree)
        if x == c.depth:
            break
        inA = A.bit(x)
        nxt: dict[tuple[int, int, int], tuple | None] = {}
        for st in level:
            s, a, b = st
            for col, n in P.sorted_edges(x, s):
                if _count_bit(c, i, x, col):
                    ns = (n, min(cap, a + inA), min(cap, b + 1 - inA))
                else:
                    ns = (n, a, b)
                if good is not None and not _meets(ns, t, good[x + 1]):
                    continue
                if ns not in nxt:
                    nxt[ns] = (st, col)
        level = nxt
        history.append(level)
    raise ForcingError(f"no extension of part {i} reaches {m} elements on each side by the horizon")


def _meets(st: tuple[int, int, int], t: int, good: set) -> bool:
    # a state capped at max(m, t) is good when its t-capped image is
    return (st[0], min(st[1], t), min(st[2], t)) in good


def _trace_back(history: list[dict], st) -> list[int]:
    cols = []
    for level in reversed(history[1:]):
        st, col = level[st]
        cols.append(col)
    return cols[::-1]


def _segment(c: Condition, i: int, A: BitString, start: int, state: int) -> list[int] | None:
    """Shortest (then lexicographically least) run of columns from ``state`` at
    level ``start`` adding an ``A`` and an ``Ā`` element to part ``i``."""
    P = c.tree
    level: dict[tuple[int, int, int], tuple | None] = {(state, 0, 0): None}
    history = [level]
    for x in range(start, c.depth):
        inA = A.bit(x)
        nxt: dict[tuple[int, int, int], tuple | None] = {}
        for st in level:
            s, a, b = st
            for col, n in P.sorted_edges(x, s):
                if _count_bit(c, i, x, col):
                    ns = (n, a | inA, b | (1 - inA))
                else:
                    ns = (n, a, b)
                if ns not in nxt:
                    nxt[ns] = (st, col)
        level = nxt
        history.append(level)
        for st in level:
            if st[1] and st[2]:
                return _trace_back(history, st)
    return None


def find_acceptable_part(c: Condition, A: BitString, t: int) -> tuple[int, BitString] | None:
    """Greedy path assembly: each segment adds an element of ``A`` and of ``Ā``
    to the least part that admits one; returns the most frequent part and the
    assembled path when that part meets threshold ``t`` on it."""
    P = c.tree
    cols: list[int] = []
    state = 0
    tally = [0] * c.k
    while len(cols) < c.depth:
        for i in range(c.k):
            seg = _segment(c, i, A, len(cols), state)
            if seg is not None:
                break
        else:
            break
        tally[i] += 1
        for col in seg:
            state = P.edges(len(cols), state)[col]
            cols.append(col)
    if not any(tally):
        return None
    best = max(range(c.k), key=lambda i: (tally[i], -i))
    rest = P.subtree(from_columns(cols, c.k)).first_path()
    if rest is None:
        return None
    path = from_columns(rest, c.k)
    part = path_part(path, c.k, best)
    full = overwrite(part, c.stems[best])
    inside = restrict(full, A.truncated(full.length)).count()
    if inside < t or full.count() - inside < t:
        return None
    return best, path


def path_part(code: BitString, k: int, i: int) -> BitString:
    return BitString.from_bits((col >> i) & 1 for col in columns(code, k))


def compute_A_from_C(
    c: Condition, T: PartitionTree, S_A: Iterable[int], S_Abar: Iterable[int], n: int, depth: int
) -> int | None:
    """Decide ``n ∈ A`` from a tree whose parts in ``S_A`` (resp. ``S_Ā``) lie in
    ``A`` (resp. ``Ā``) past their stems: 1, 0, or ``None`` when undecided."""
    if T.k != c.k:
        raise ValueError("tree and condition disagree on the number of parts")
    mA = sum(1 << i for i in S_A)
    mB = sum(1 << i for i in S_Abar)
    bound = min(depth, T.depth)
    if bound <= n:
        return None
    U = T.truncate(bound)
    live_A = U.exists_path(lambda x, col: x != n or col & mA)
    live_B = U.exists_path(lambda x, col: x != n or col & mB)
    if not live_A and not live_B:
        raise ForcingError(f"both candidate lists for {n} are empty: the tree has no path")
    if live_A and live_B:
        return None
    return 1 if live_A else 0


# -- R_{e,i} at the horizon --------------------------------------------------------


def requirement_witness(G: BitString, e: int, i: int, inst: Instance) -> tuple[str, str, int] | None:
    """``(side, kind, n)`` showing the requirement holds of ``G``, or ``None``.

    ``side`` is ``A`` or ``Abar``; ``kind`` is ``hit`` (diagonal value matched)
    or ``divergent`` (no output at ``s_max``).
    """
    reg = inst.registry
    for func, mask, side in ((e, inst.A, "A"), (i, inst.A_bar, "Abar")):
        oracle = BitString(G.value & mask.value, mask.length)
        for n in inst.domain:
            v = eval_functional(reg, func, oracle, inst.C, n, reg.s_max)
            if v is None:
                return side, "divergent", n
            if diag(reg, n, reg.s_max) == v:
                return side, "hit", n
    return None


def _escape_options(inst: Instance, func: int, mask: BitString) -> list[list[tuple[int, int]]] | None:
    """Per tested input, the ``(ones, zeros)`` literal masks on ``G`` under which
    ``func`` converges without a diagonal hit; ``None`` if some input has none."""
    reg = inst.registry
    out = []
    for n in inst.domain:
        d = diag(reg, n, reg.s_max)
        opts = set()
        for en in reg.entries(func, n):
            if en.settle > reg.s_max or not en.c_ok(inst.C) or en.output == d:
                continue
            if en.g_ones & ~mask.value:
                continue
            opts.add((en.g_ones, en.g_zeros & mask.value))
        if not opts:
            return None
        out.append(sorted(opts))
    return out


def failing_G(c: Condition, j: int, e: int, i: int, inst: Instance) -> BitString | None:
    """A full-horizon ``G`` satisfying ``c`` on part ``j`` for which the
    requirement fails, or ``None`` when part ``j`` forces it."""
    sides = []
    for func, mask in ((e, inst.A), (i, inst.A_bar)):
        opts = _escape_options(inst, func, mask)
        if opts is None:
            return None
        sides.extend(opts)
    sigma, depth, P = c.stems[j], c.depth, c.tree
    low = (1 << sigma.length) - 1
    full = (1 << depth) - 1
    reservoir_ok: dict[int, bool] = {}

    def fits(ones: int) -> bool:
        beyond = ones & ~low
        if beyond not in reservoir_ok:
            reservoir_ok[beyond] = P.exists_path(
                lambda x, col: not (beyond >> x) & 1 or (col >> j) & 1
            )
        return reservoir_ok[beyond]

    def search(slot: int, ones: int, zeros: int) -> int | None:
        if slot == len(sides):
            return ones
        for o, z in sides[slot]:
            no, nz = ones | o, zeros | z
            if no & nz or no & ~full or no & low & ~sigma.value or nz & low & sigma.value:
                continue
            if no != ones and not fits(no):
                continue
            found = search(slot + 1, no, nz)
            if found is not None:
                return found
        return None

    if not fits(0):
        return None
    ones = search(0, 0, 0)
    if ones is None:
        return None
    return BitString(sigma.value | ones, depth)


def forces_R_at_horizon(c: Condition, j: int, e: int, i: int, inst: Instance) -> bool:
    return failing_G(c, j, e, i, inst) is None


def unforced_parts(c: Condition, e: int, i: int, inst: Instance) -> tuple[int, ...]:
    """``U(c)``: the parts on which the requirement is not yet forced."""
    return tuple(j for j in range(c.k) if not forces_R_at_horizon(c, j, e, i, inst))


# -- Case i ------------------------------------------------------------------------


@dataclass(frozen=True)
class CaseIHit:
    part: int
    n: int
    side: str
    entry: Entry
    tau: BitString


def case_i_hit(
    c: Condition, p: Valuation, e: int, i: int, inst: Instance, U: Iterable[int] | None = None
) -> CaseIHit:
    """Locate the diagonal hit on the lexicographically least path split along
    ``A``, and the shortest stem extension that locks it in."""
    if U is None:
        U = unforced_parts(c, e, i, inst)
    reg = inst.registry
    cols = c.tree.first_path()
    if cols is None:
        raise ForcingError("condition has no path")
    for j in sorted(U):
        sigma = c.stems[j]
        Xj = sum(1 << x for x, col in enumerate(cols) if (col >> j) & 1)
        for n, b in p.items:
            d = diag(reg, n, reg.s_max)
            if d is None or d == b:
                continue
            for func, mask, side in ((e, inst.A, "A"), (i, inst.A_bar, "Abar")):
                sv = restrict(sigma, mask).value
                for en in reg.entries(func, n):
                    if en.settle > reg.s_max or en.output != d or not en.c_ok(inst.C):
                        continue
                    ok, ones, top = True, 0, sigma.length
                    for x, bit in en.g_literals():
                        if x < sigma.length:
                            ok = (sv >> x) & 1 == bit
                        else:
                            if bit:
                                ok = x < c.depth and (Xj >> x) & 1 and (mask.value >> x) & 1
                                ones |= 1 << x
                            top = max(top, x + 1) if x < c.depth else top
                        if not ok:
                            break
                    if ok:
                        tau = BitString(sigma.value | ones, top)
                        return CaseIHit(j, n, side, en, tau)
    raise ForcingError(f"no diagonal hit for {p} on the least path: case misclassified")


def case_i_extension(
    c: Condition, p: Valuation, e: int, i: int, inst: Instance, U: Iterable[int] | None = None
) -> Condition:
    hit = case_i_hit(c, p, e, i, inst, U)
    tree = refine_below(c.tree, hit.part, hit.tau, "subset", c.stems[hit.part])
    return c.replace_stem(hit.part, hit.tau, tree)


# -- Case ii -----------------------------------------------------------------------


def case_ii_part_count(k: int) -> int:
    return 2 * k * len(pair_list(2 * k + 1))


def case_ii_witness(k: int) -> tuple[int, ...]:
    """Part ``(h, a, b)`` of the cross refines part ``h // 2`` of the old condition."""
    n = 2 * k + 1
    f = [0] * case_ii_part_count(k)
    for h in range(2 * k):
        for a, b in pair_list(n):
            f[cross_part_index(h, a, b, n)] = h // 2
    return tuple(f)


def case_ii_extension(
    c: Condition,
    ps: Sequence[Valuation],
    e: int,
    i: int,
    inst: Instance,
    U: Iterable[int] | None = None,
) -> Condition:
    k = c.k
    if len(ps) != 2 * k + 1:
        raise ValueError(f"need {2 * k + 1} valuations, got {len(ps)}")
    for p, q in itertools.combinations(ps, 2):
        if not incompatible(p, q):
            raise ValueError(f"valuations {p} and {q} are compatible")
    if case_ii_part_count(k) > inst.max_parts:
        raise PartBudgetExceeded(f"{case_ii_part_count(k)} parts exceed the budget of {inst.max_parts}")
    if U is None:
        U = unforced_parts(c, e, i, inst)
    U = tuple(U)
    trees = []
    for p in ps:
        S = build_Sp_tree(c, p, e, i, inst, U)
        if S.is_empty:
            raise ForcingError(f"the class of splits escaping {p} is empty: case misclassified")
        trees.append(S)
    Q = cross_trees(trees)
    f = case_ii_witness(k)
    return Condition(tuple(c.stems[x] for x in f), Q)


# -- the dichotomy ---------------------------------------------------------------------


@dataclass(frozen=True)
class CaseI:
    tag: ClassVar[str] = "CaseI"
    p: Valuation
    enumeration: DisagreementEnumeration


@dataclass(frozen=True)
class CaseII:
    tag: ClassVar[str] = "CaseII"
    valuations: tuple[Valuation, ...]
    witnesses: tuple[int, ...]
    enumeration: DisagreementEnumeration


@dataclass(frozen=True)
class Unresolved:
    tag: ClassVar[str] = "Unresolved"
    reason: str
    witnesses: tuple[int, ...] = ()


@dataclass(frozen=True)
class HypothesisViolated:
    """The search built a function avoiding the diagonal on the tested domain."""

    tag: ClassVar[str] = "HypothesisViolated"
    h: Valuation
    witnesses: tuple[int, ...]
    sources: tuple[str, ...] = field(default=())


SearchOutcome = CaseI | CaseII | Unresolved | HypothesisViolated


def _covering(p: Valuation, F: set[int], n: int, reg) -> bool:
    """``F ∪ {n} ⊆ dom p`` and ``p`` differs from settled diagonal values elsewhere."""
    dom = set(p.dom)
    if not (F | {n}) <= dom:
        return False
    for m, b in p.items:
        if m in F or m == n:
            continue
        v = diag(reg, m, reg.s_max)
        if v is None or v == b:
            return False
    return True


def dichotomy_search(
    c: Condition, e: int, i: int, inst: Instance, U: Iterable[int] | None = None
) -> SearchOutcome:
    if U is None:
        U = unforced_parts(c, e, i, inst)
    U = tuple(U)
    reg = inst.registry
    E = enumerate_E(c, e, i, inst, U)
    for p in E:
        if is_settled_correct(p, reg):
            return CaseI(p, E)
    domain = list(inst.domain)
    F: list[int] = []
    while True:
        rest = [n for n in domain if n not in F]
        if not rest:
            return Unresolved(f"tested domain 0..{inst.domain_bound} exhausted", tuple(F))
        Fs = set(F)
        witness = next(
            (
                n
                for n in rest
                if reg.diag_value(n) is None and not any(_covering(p, Fs, n, reg) for p in E)
            ),
            None,
        )
        if witness is None:
            return _violation(F, E, inst)
        F.append(witness)
        if 2 ** len(F) >= 2 * c.k + 1:
            vals = tuple(itertools.islice(valuations_on(F), 2 * c.k + 1))
            if any(v in E for v in vals):
                raise ForcingError("a valuation on the witness set lies in E")
            return CaseII(vals, tuple(F), E)


def _violation(F: list[int], E: DisagreementEnumeration, inst: Instance) -> HypothesisViolated:
    reg = inst.registry
    Fs = set(F)
    h, sources = [], []
    for n in inst.domain:
        if n in Fs:
            h.append((n, 0))
            sources.append(f"{n}:witness")
            continue
        v = reg.diag_value(n)
        if v is not None:
            h.append((n, 1 - v))
            sources.append(f"{n}:diagonal")
            continue
        p = next(p for p in E if _covering(p, Fs, n, reg))
        h.append((n, 1 - p[n]))
        sources.append(f"{n}:{p}")
    return HypothesisViolated(Valuation(tuple(h)), tuple(F), tuple(sources))


def avoids_diagonal(h: Valuation, inst: Instance) -> bool:
    """``h(n) ≠`` the diagonal value wherever it has settled."""
    return is_correct(h, inst.registry)


# -- forcing R_{e,i} -----------------------------------------------------------------


@dataclass(frozen=True)
class RStep:
    tag: str
    k_from: int
    k_to: int
    witness: tuple[int, ...]
    unforced_before: tuple[int, ...]
    unforced_after: tuple[int, ...]
    valuations: tuple[Valuation, ...] = ()
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RForcing:
    condition: Condition
    witness: tuple[int, ...]
    steps: tuple[RStep, ...]
    status: str  # "forced", "Unresolved" or "HypothesisViolated"
    outcome: SearchOutcome | None = None


def force_R_extension(c: Condition, e: int, i: int, inst: Instance) -> RForcing:
    """Alternate the dichotomy and the matching extension until every part forces
    the requirement; each round shrinks the set of unforced parts."""
    cur, f = c, identity_witness(c.k)
    steps: list[RStep] = []
    U = unforced_parts(cur, e, i, inst)
    if not U:
        steps.append(RStep("Forced", c.k, c.k, f, (), ()))
        return RForcing(cur, f, tuple(steps), "forced")
    for _ in range(c.k):
        outcome = dichotomy_search(cur, e, i, inst, U)
        if isinstance(outcome, CaseI):
            hit = case_i_hit(cur, outcome.p, e, i, inst, U)
            tree = refine_below(cur.tree, hit.part, hit.tau, "subset", cur.stems[hit.part])
            nxt, g = cur.replace_stem(hit.part, hit.tau, tree), identity_witness(cur.k)
            vals = (outcome.p,)
            detail = {"part": hit.part, "n": hit.n, "side": hit.side, "tau": str(hit.tau)}
        elif isinstance(outcome, CaseII):
            try:
                nxt = case_ii_extension(cur, outcome.valuations, e, i, inst, U)
            except PartBudgetExceeded as exc:
                out = Unresolved(str(exc), outcome.witnesses)
                return RForcing(cur, f, tuple(steps), "Unresolved", out)
            g, vals = case_ii_witness(cur.k), outcome.valuations
            detail = {"witnesses": list(outcome.witnesses)}
        else:
            return RForcing(cur, f, tuple(steps), outcome.tag, outcome)
        U_next = unforced_parts(nxt, e, i, inst)
        steps.append(RStep(outcome.tag, cur.k, nxt.k, g, U, U_next, vals, detail))
        cur, f, U = nxt, compose(f, g), U_next
        if not U:
            return RForcing(cur, f, tuple(steps), "forced")
    out = Unresolved(f"round cap {c.k} reached with parts {list(U)} unforced")
    return RForcing(cur, f, tuple(steps), "Unresolved", out)
