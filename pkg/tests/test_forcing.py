import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from instances import S_MAX, case_i_instance, empty_instance, pa_like_instance, two_way
from ptforcing.bitvec import BitString, GroundSets, bs, from_columns, restrict
from ptforcing.condition import Condition, Instance, identity_witness
from ptforcing.forcing import (
    CaseI,
    CaseII,
    ForcingError,
    HypothesisViolated,
    MathiasCondition,
    PartBudgetExceeded,
    Unresolved,
    acceptable_parts,
    case_i_extension,
    case_ii_extension,
    case_ii_part_count,
    case_ii_witness,
    compute_A_from_C,
    dichotomy_search,
    extends,
    find_acceptable_part,
    force_Qm_extension,
    force_R_extension,
    forces_Qm,
    forces_R_at_horizon,
    mathias_extends,
    path_part,
    requirement_witness,
    satisfies,
    satisfies_on,
    unforced_parts,
)
from ptforcing.oracle import Entry, make_registry, random_registry
from ptforcing.ptree import PartitionTree
from ptforcing.valuation import Valuation, incompatible

V = Valuation.parse


def seeded(max_examples=80):
    return lambda f: settings(max_examples=max_examples, deadline=None)(given(st.integers(0, 10**6))(f))


def test_mathias_example():
    c = MathiasCondition(bs("1"), bs("1111"))
    d = MathiasCondition(bs("10"), bs("1011"))
    assert mathias_extends(d, c)
    assert not mathias_extends(c, d)
    assert not mathias_extends(MathiasCondition(bs("0"), bs("1111")), c)


def test_extends_reflexive_and_stem_order():
    rng = random.Random(0)
    for _ in range(30):
        c = oracles.random_condition(rng, rng.randint(1, 3), 3)
        assert extends(c, c, identity_witness(c.k))
    c = Condition((bs("1"),), PartitionTree.full(1, 3))
    d = Condition((bs("11"),), PartitionTree.full(1, 3))
    assert extends(d, c, (0,))
    assert not extends(c, d, (0,))


@seeded()
def test_extends_matches_brute(seed):
    rng = random.Random(seed)
    depth = rng.randint(1, 3)
    c = oracles.random_condition(rng, rng.randint(1, 2), depth)
    d = oracles.random_condition(rng, rng.randint(1, 2), depth)
    f = tuple(rng.randrange(c.k) for _ in range(d.k))
    assert extends(d, c, f) == oracles.extends(d, c, f)


def test_satisfies_examples():
    full = PartitionTree.full(2, 4)
    c = Condition((bs("10"), bs("011")), full)
    assert satisfies(bs("1000"), c) == 0
    assert satisfies(bs("0110"), c) == 1
    assert satisfies(bs("0011"), c) is None
    with pytest.raises(ValueError):
        satisfies(bs("10"), c)


@seeded()
def test_satisfies_on_matches_brute(seed):
    rng = random.Random(seed)
    depth = rng.randint(1, 4)
    c = oracles.random_condition(rng, rng.randint(1, 3), depth)
    for g in range(1 << depth):
        G = BitString(g, depth)
        for i in range(c.k):
            assert satisfies_on(G, c, i) == oracles.satisfies_on(G, c, i)


def test_forces_Qm_examples():
    A = BitString.from_positions([0, 1], 4)
    c = Condition((bs("1101"),), PartitionTree.full(1, 4))
    assert not forces_Qm(c, 0, A, 2)
    c = Condition((bs("1111"),), PartitionTree.full(1, 4))
    assert forces_Qm(c, 0, BitString.from_positions([0, 2], 4), 2)


@seeded()
def test_acceptable_parts_match_brute(seed):
    rng = random.Random(seed)
    depth = rng.randint(1, 5)
    c = oracles.random_condition(rng, rng.randint(1, 3), depth)
    A = BitString.random(depth, rng)
    t = rng.randint(1, 2)
    assert set(acceptable_parts(c, A, t)) == oracles.acceptable(c, A, t)


def test_acceptable_examples():
    A = BitString.from_bits(x % 2 for x in range(8))
    assert acceptable_parts(Condition.initial(8), A, 3) == (0,)
    inside = from_columns([0b10 if A.bit(x) else 0b01 for x in range(8)], 2)
    c = Condition((bs(""), bs("")), PartitionTree.single(2, inside))
    assert acceptable_parts(c, A, 1) == ()
    found = find_acceptable_part(Condition.initial(8), A, 2)
    assert found is not None
    part, path = found
    X = path_part(path, 1, part)
    assert restrict(X, A).count() >= 2 and X.count() - restrict(X, A).count() >= 2
    assert find_acceptable_part(c, A, 1) is None


@seeded(60)
def test_find_acceptable_part_is_sound(seed):
    rng = random.Random(seed)
    depth = rng.randint(2, 6)
    c = oracles.random_condition(rng, rng.randint(1, 3), depth, max_stem=1)
    A = BitString.random(depth, rng)
    found = find_acceptable_part(c, A, 1)
    if found is None:
        return
    part, path = found
    assert c.tree.contains(path)
    assert part in acceptable_parts(c, A, 1)


@seeded(60)
def test_force_Qm_extension_postconditions(seed):
    rng = random.Random(seed)
    depth = rng.randint(2, 8)
    c = oracles.random_condition(rng, rng.randint(1, 2), depth, max_stem=1)
    A = BitString.random(depth, rng)
    t = rng.randint(1, 2)
    ok = acceptable_parts(c, A, t)
    if not ok:
        return
    i = ok[0]
    m = rng.randint(0, t)
    d = force_Qm_extension(c, i, A, m, t)
    assert forces_Qm(d, i, A, m)
    assert extends(d, c, identity_witness(c.k))
    assert i in acceptable_parts(d, A, t)


def test_force_Qm_zero_and_failure():
    c = Condition.initial(4)
    A = BitString.from_positions([0, 1], 4)
    assert force_Qm_extension(c, 0, A, 0) == c
    assert force_Qm_extension(c, 0, A, 2).stems[0] == bs("1111")
    with pytest.raises(ForcingError):
        force_Qm_extension(c, 0, A, 3)


def test_compute_A_from_C_examples():
    c = Condition((bs(""), bs("")), PartitionTree.full(2, 4))
    single = PartitionTree.single(2, from_columns([0b01, 0b11, 0b10, 0b01], 2))
    assert compute_A_from_C(c, single, [0], [1], 0, 4) == 1
    assert compute_A_from_C(c, single, [0], [1], 2, 4) == 0
    # the Ā branch of position 0 stops at depth 3
    live = from_columns([0b01, 0b01, 0b01, 0b01], 2)
    dead = [from_columns([0b10] * d, 2) for d in range(1, 4)]
    T = PartitionTree.from_nodes(2, 4, [bs("")] + [live.prefix(2 * d) for d in range(1, 5)] + dead)
    assert compute_A_from_C(c, T, [0], [1], 0, 4) == 1
    assert compute_A_from_C(c, T, [0], [1], 0, 3) is None
    assert compute_A_from_C(c, T, [0], [1], 0, 0) is None
    with pytest.raises(ForcingError):
        compute_A_from_C(c, PartitionTree.empty(2, 4), [0], [1], 0, 4)


def _registry_instance(rng, N):
    if rng.random() < 0.5:
        reg = oracles.random_total_registry(rng, N, n_max=2)
    else:
        reg = random_registry(rng, [0, 1], N, 2, c_side_prob=0.1, fill=0.9)
    return Instance(reg, GroundSets(BitString.random(N, rng), BitString.random(N, rng)), domain_bound=2)


@seeded(120)
def test_forces_R_matches_G_sweep(seed):
    rng = random.Random(seed)
    N = rng.randint(1, 6)
    inst = _registry_instance(rng, N)
    c = oracles.random_condition(rng, rng.randint(1, 2), N)
    for j in range(c.k):
        assert forces_R_at_horizon(c, j, 0, 1, inst) == oracles.forces_R(c, j, 0, 1, inst)


def test_forces_R_examples():
    grounds, reg = empty_instance(6)
    assert forces_R_at_horizon(Condition.initial(6), 0, 0, 1, Instance(reg, grounds))
    # both functionals compute the complement of a settled diagonal on 0..1
    diag = {0: (1, 1), 1: (0, 1)}
    dnr = [Entry(n, (), 1, 1 - v) for n, (v, _) in diag.items()]
    reg = make_registry({0: dnr, 1: dnr}, diag, S_MAX, 6)
    inst = Instance(reg, GroundSets.random(6, 0), domain_bound=1)
    assert not forces_R_at_horizon(Condition.initial(6), 0, 0, 1, inst)


def test_case_ii_shapes():
    assert case_ii_part_count(1) == 6
    assert case_ii_part_count(2) == 40
    f = case_ii_witness(2)
    assert len(f) == 40 and set(f) == {0, 1}
    assert f.count(0) == f.count(1) == 20


def test_empty_registry_dichotomy_and_case_ii():
    grounds, reg = empty_instance(6)
    inst = Instance(reg, grounds)
    c = Condition.initial(6)
    out = dichotomy_search(c, 0, 1, inst, [0])
    assert isinstance(out, CaseII)
    assert all(incompatible(p, q) for p in out.valuations for q in out.valuations if p != q)
    d = case_ii_extension(c, out.valuations, 0, 1, inst, [0])
    assert d.k == 6
    assert extends(d, c, case_ii_witness(1))
    with pytest.raises(ValueError):
        case_ii_extension(c, out.valuations[:2], 0, 1, inst, [0])
    with pytest.raises(PartBudgetExceeded):
        case_ii_extension(c, out.valuations, 0, 1, Instance(reg, grounds, max_parts=4), [0])


def test_case_i_instance():
    grounds, reg = case_i_instance(8)
    inst = Instance(reg, grounds)
    c = Condition.initial(8)
    out = dichotomy_search(c, 0, 1, inst)
    assert isinstance(out, CaseI)
    d = case_i_extension(c, out.p, 0, 1, inst)
    assert extends(d, c, identity_witness(1))
    assert unforced_parts(d, 0, 1, inst) == ()
    r = force_R_extension(c, 0, 1, inst)
    assert r.status == "forced" and [s.tag for s in r.steps] == ["CaseI"]


def test_zero_budget_is_unresolved():
    grounds, reg = empty_instance(1)
    inst = Instance(reg, GroundSets(bs(""), bs("")), domain_bound=0)
    out = dichotomy_search(Condition.initial(0), 0, 1, inst, [0])
    assert isinstance(out, Unresolved)


def test_pa_like_search_builds_h():
    grounds, reg = pa_like_instance()
    inst = Instance(reg, grounds)
    c = Condition.initial(grounds.universe_size)
    out = dichotomy_search(c, 0, 1, inst)
    assert isinstance(out, HypothesisViolated)
    assert out.h.dom == (0, 1, 2, 3)
    r = force_R_extension(c, 0, 1, inst)
    assert r.status == "HypothesisViolated" and r.condition == c


def test_force_R_on_forced_condition_is_identity():
    grounds, reg = empty_instance(5)
    inst = Instance(reg, grounds)
    c = Condition.initial(5)
    r = force_R_extension(c, 0, 1, inst)
    assert r.condition == c and r.status == "forced"
    assert [s.tag for s in r.steps] == ["Forced"]


def _g_sweep(c, inst):
    """Every G satisfying some part meets the requirement."""
    for g in range(1 << c.depth):
        G = BitString(g, c.depth)
        if satisfies(G, c) is not None and requirement_witness(G, 0, 1, inst) is None:
            return False
    return True


def test_part_budget_gives_unresolved():
    N = 8
    A = BitString.from_bits(x % 2 == 0 for x in range(N))
    grounds = GroundSets(A, BitString.zeros(N))
    a, b = A.positions(), grounds.A_bar.positions()
    tables = {0: two_way({n: (a[-1], a[-2]) for n in range(4)}), 1: two_way({n: (b[-1], b[-2]) for n in range(4)})}
    reg = make_registry(tables, {}, S_MAX, N)
    inst = Instance(reg, grounds, max_parts=4)
    r = force_R_extension(Condition.initial(N), 0, 1, inst)
    assert r.status == "Unresolved"
    full = force_R_extension(Condition.initial(N), 0, 1, Instance(reg, grounds))
    assert full.status == "forced" and full.condition.k == 6
    assert _g_sweep(full.condition, Instance(reg, grounds))


@seeded(40)
def test_force_R_postconditions(seed):
    rng = random.Random(seed)
    N = rng.randint(3, 6)
    reg = oracles.random_total_registry(rng, N)
    inst = Instance(reg, GroundSets(BitString.random(N, rng), BitString.zeros(N)))
    c = Condition.initial(N)
    r = force_R_extension(c, 0, 1, inst)
    if r.status != "forced":
        return
    assert extends(r.condition, c, r.witness)
    assert _g_sweep(r.condition, inst)
