import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from instances import S_MAX
from ptforcing.bitvec import BitString, GroundSets, bs
from ptforcing.condition import Condition, Instance
from ptforcing.oracle import Entry, make_registry, random_registry
from ptforcing.ptree import PartitionTree
from ptforcing.valuation import (
    Valuation,
    all_valuations,
    build_Sp_tree,
    condition_disagrees,
    enumerate_E,
    functional_disagrees,
    incompatible,
    is_correct,
    is_settled_correct,
    requirements,
)

V = Valuation.parse


def test_parse_and_print():
    assert str(V("{3:1, 0:0}")) == "{0:0,3:1}"
    assert V("{}") == Valuation()
    with pytest.raises(ValueError):
        V("{0:2}")
    with pytest.raises(ValueError):
        V("{0:1,0:0}")


def test_correctness_examples():
    reg = make_registry({}, {3: (1, 2)}, 4)
    assert is_correct(V("{3:0}"), reg)
    assert not is_correct(V("{3:1}"), reg)
    assert is_correct(V("{0:1,5:0}"), reg)
    assert is_settled_correct(V("{3:0}"), reg)
    assert not is_settled_correct(V("{0:1,3:0}"), reg)


def test_incompatible_examples():
    assert incompatible(V("{0:0}"), V("{0:1}"))
    assert not incompatible(V("{0:0}"), V("{1:1}"))


def test_all_valuations_order():
    vals = list(all_valuations(1))
    assert len(vals) == 9
    assert vals[0] == Valuation()
    assert [len(v) for v in vals] == sorted(len(v) for v in vals)


def test_functional_disagrees_examples():
    empty = make_registry({0: []}, {}, 4, 4)
    z = bs("0000")
    for p in all_valuations(2):
        assert functional_disagrees(empty, 0, bs(""), bs("1111"), p, bs("1111"), z) is None
    const = make_registry({0: [Entry(0, (), 1, 1)]}, {}, 4, 4)
    Y, n = functional_disagrees(const, 0, bs(""), bs("1111"), V("{0:0}"), bs("1111"), z)
    assert n == 0 and Y.count() == 0
    assert functional_disagrees(const, 0, bs(""), bs("1111"), V("{0:1}"), bs("1111"), z) is None


@given(st.integers(0, 10**6))
def test_functional_disagrees_matches_brute(seed):
    rng = random.Random(seed)
    N = rng.randint(1, 6)
    reg = random_registry(rng, [0], N, 2)
    X, mask, C = (BitString.random(N, rng) for _ in range(3))
    rho = BitString.random(rng.randint(0, N), rng)
    p = oracles.random_valuation(rng, 2, 2)
    fast = functional_disagrees(reg, 0, rho, X, p, mask, C)
    assert (fast is not None) == oracles.functional_disagrees(reg, 0, rho, X, p, mask, C)
    if fast is not None:
        Y, n = fast
        assert Y.value & ~X.value == 0
        low = (1 << rho.length) - 1
        g = ((Y.value & ~low) | rho.value) & mask.value
        out = oracles.out(reg, 0, g, C, n, N)
        assert out is not None and out != p[n]


def _instance(rng, N, **kw):
    reg = random_registry(rng, [0, 1], N, 2, c_side_prob=0.15, **kw)
    return Instance(reg, GroundSets(BitString.random(N, rng), BitString.random(N, rng)), domain_bound=2)


def test_empty_tables_give_full_refinement():
    N = 3
    inst = Instance(make_registry({0: [], 1: []}, {}, S_MAX, N), GroundSets.random(N, 1))
    c = Condition.initial(N)
    for p in all_valuations(1):
        assert build_Sp_tree(c, p, 0, 1, inst, [0]) == PartitionTree.full(2, N)
        assert not condition_disagrees(c, p, 0, 1, inst, [0])
    assert len(enumerate_E(c, 0, 1, inst, [0])) == 0


def test_constant_contradiction_disagrees():
    N = 3
    tables = {0: [Entry(0, (), 1, 1)], 1: [Entry(0, (), 1, 1)]}
    inst = Instance(make_registry(tables, {0: (1, 1)}, S_MAX, N), GroundSets.random(N, 1))
    c = Condition.initial(N)
    assert condition_disagrees(c, V("{0:0}"), 0, 1, inst, [0])
    assert oracles.condition_disagrees(c, V("{0:0}"), 0, 1, inst, [0])
    assert not condition_disagrees(c, V("{0:1}"), 0, 1, inst, [0])
    E = enumerate_E(c, 0, 1, inst, [0])
    assert V("{0:0}") in E and V("{0:0,1:1}") in E


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_sp_tree_paths_match_brute(seed):
    rng = random.Random(seed)
    N = rng.randint(1, 4)
    inst = _instance(rng, N)
    c = oracles.random_condition(rng, rng.randint(1, 2), N, max_paths=2)
    U = [j for j in range(c.k) if rng.random() < 0.8]
    p = oracles.random_valuation(rng, 2, 2)
    assert build_Sp_tree(c, p, 0, 1, inst, U).paths_at_depth() == oracles.sp_paths(c, p, 0, 1, inst, U)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_factorized_brute_force_matches_joint(seed):
    rng = random.Random(seed)
    N = rng.randint(1, 3)
    inst = _instance(rng, N)
    c = oracles.random_condition(rng, rng.randint(1, 2), N, max_paths=2)
    p = oracles.random_valuation(rng, 2, 2)
    U = range(c.k)
    assert oracles.condition_disagrees(c, p, 0, 1, inst, U) == oracles.condition_disagrees_joint(c, p, 0, 1, inst, U)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_disagreement_is_upward_closed(seed):
    rng = random.Random(seed)
    N = rng.randint(2, 5)
    inst = _instance(rng, N)
    c = oracles.random_condition(rng, rng.randint(1, 2), N, max_paths=2)
    U = list(range(c.k))
    E = enumerate_E(c, 0, 1, inst, U)
    for p in all_valuations(2):
        member = p in E
        assert member == condition_disagrees(c, p, 0, 1, inst, U)
        if member:
            for q in all_valuations(2):
                if p.restricts(q):
                    assert q in E


def test_requirements_drop_supersets():
    N = 4
    tables = {
        0: [Entry(0, ((2, "G", 1),), 1, 1), Entry(1, ((2, "G", 1), (3, "G", 1)), 1, 1)],
        1: [],
    }
    inst = Instance(make_registry(tables, {}, S_MAX, N), GroundSets(BitString.ones(N), BitString.zeros(N)))
    blocked, reqs = requirements(Condition.initial(N), V("{0:0,1:0}"), 0, 1, inst, [0])
    assert not blocked
    assert [sorted(r.positions) for r in reqs] == [[2]]
    assert reqs[0].half == 0
