import random

import pytest

from sbcheck.adapt import (
    STRONG_INNER,
    WEAK_INNER,
    AdaptRelation,
    PreconditionError,
    check_strong,
    check_weak,
    greatest_strong_relation,
    is_strong_adaptation,
    is_weak_adaptation,
    state_adaptable,
    strong_relation,
    weak_relation,
)
from sbcheck.cli import gen_random
from sbcheck.constraints import BoundedInt, Signature, parse_formula
from sbcheck.ctl import sat_set
from sbcheck.flatten import build_flat
from sbcheck.kripke import to_kripke
from sbcheck.model import BLevel, BState, SBSystem, SLevel, STransition

ATV_S0_PAIRS = {("0", "r0"), ("1", "r0"), ("2", "r0"), ("3", "r0"),
                ("11", "r1"), ("10", "r1"), ("13", "r1")}
ATV_S1_WEAK_PAIRS = {("0", "r0"), ("1", "r0"), ("2", "r0"), ("3", "r0")}
BONE_S0_PAIRS = {("0_0_1", "r0"), ("0_0_2", "r0"), ("2_0_0", "r1"),
                 ("1_0_0", "r1"), ("0_1_0", "r2")}
BONE_S1_WEAK_PAIRS = {
    ("0_0_1", "r0"), ("0_0_2", "r0"), ("2_0_0", "r1"), ("1_0_0", "r1"),
    ("0_1_0", "r2"), ("0_0_2", "r3"), ("2_0_0", "r4"), ("0_4_0", "r5"),
    ("0_3_0", "r5"), ("0_2_0", "r2"),
}


# ---------------------------------------------------------------------------
# Verdicts


def test_verdict_table(bundled):
    expected = {"atv_s0": (True, True), "atv_s1": (True, False),
                "bone_s0": (True, True), "bone_s1": (True, False)}
    for name, sys_ in bundled.items():
        assert (check_weak(sys_).holds, check_strong(sys_).holds) == expected[name], name


def _assert_run(sys_, evidence, inner=None):
    """Evidence states must be edge-connected in the Kripke structure and,
    when ``inner`` is given, all satisfy it."""
    k = to_kripke(build_flat(sys_))
    seq = [k.states.index(f) for f in evidence.states()]
    for a, b in zip(seq, seq[1:]):
        assert b in k.succ[a]
    if evidence.cycle:
        head = k.states.index(evidence.cycle[0])
        last = k.states.index(evidence.cycle[-1])
        assert head in k.succ[last]
    if inner is not None:
        good = sat_set(k, inner)
        assert all(t in good for t in seq)


def test_weak_witnesses_self_verify(bundled):
    for sys_ in bundled.values():
        v = check_weak(sys_)
        assert v.holds
        _assert_run(sys_, v.evidence, WEAK_INNER)


def test_strong_witnesses_self_verify(atv_s0, bone_s0):
    for sys_ in (atv_s0, bone_s0):
        v = check_strong(sys_)
        assert v.holds
        _assert_run(sys_, v.evidence, STRONG_INNER)


def test_strong_counterexample_reaches_deadlock(bone_s1):
    v = check_strong(bone_s1)
    assert not v.holds
    _assert_run(bone_s1, v.evidence)
    # ends in the self-loop of the one successor-free adapting state
    assert len(v.evidence.cycle) == 1
    dead = v.evidence.cycle[0]
    assert (dead.q, dead.r) == ("0_1_0", "r4")
    assert dead.phase == (parse_formula("Ob>0 && Oy==0", bone_s1.sig), "r5")


def test_strong_counterexample_enters_adapting_cycle(atv_s1):
    v = check_strong(atv_s1)
    assert not v.holds
    _assert_run(atv_s1, v.evidence)
    assert v.evidence.cycle
    assert all(not f.is_steady for f in v.evidence.cycle)


# ---------------------------------------------------------------------------
# Relation construction


def test_strong_relation_atv_s0(atv_s0):
    rel = strong_relation(atv_s0)
    assert rel is not None and rel.pairs == frozenset(ATV_S0_PAIRS)


def test_strong_relation_bone_s0(bone_s0):
    rel = strong_relation(bone_s0)
    assert rel is not None and rel.pairs == frozenset(BONE_S0_PAIRS)


def test_strong_relation_absent(atv_s1, bone_s1):
    assert strong_relation(atv_s1) is None
    assert strong_relation(bone_s1) is None


def test_weak_relation_atv_s1(atv_s1):
    rel = weak_relation(atv_s1)
    assert ATV_S1_WEAK_PAIRS <= rel.pairs
    assert (atv_s1.b.initial, atv_s1.s.initial) in rel


def test_weak_relation_bone_s1(bone_s1):
    rel = weak_relation(bone_s1)
    assert BONE_S1_WEAK_PAIRS <= rel.pairs


def test_weak_relation_excludes_deadlocked_initial():
    sig = Signature([("x", BoundedInt(0, 1))])
    b = BLevel([BState("q0", {"x": 0})], "q0", [])
    s = SLevel([("r0", parse_formula("x == 0", sig))], "r0", [])
    sys_ = SBSystem("stuck", sig, b, s)
    assert ("q0", "r0") not in weak_relation(sys_)


# ---------------------------------------------------------------------------
# Relation verification


def test_paper_weak_relation_is_weak_not_strong(atv_s1):
    rel = AdaptRelation(frozenset(ATV_S1_WEAK_PAIRS))
    assert is_weak_adaptation(atv_s1, rel).ok
    res = is_strong_adaptation(atv_s1, rel)
    assert not res.ok
    assert any(v.pair == ("3", "r0") and v.clause == "iii" for v in res.violations)


def test_strong_relations_verify(atv_s0, bone_s0):
    assert is_strong_adaptation(atv_s0, AdaptRelation(frozenset(ATV_S0_PAIRS))).ok
    assert is_strong_adaptation(bone_s0, AdaptRelation(frozenset(BONE_S0_PAIRS))).ok


def test_bone_s1_weak_pairs_fail_strong_check(bone_s1):
    rel = AdaptRelation(frozenset(BONE_S1_WEAK_PAIRS))
    assert is_weak_adaptation(bone_s1, rel).ok
    res = is_strong_adaptation(bone_s1, rel)
    assert not res.ok
    assert any(v.pair == ("2_0_0", "r4") for v in res.violations)


def test_empty_relation_is_vacuously_fine(atv_s0):
    empty = AdaptRelation(frozenset())
    assert is_weak_adaptation(atv_s0, empty).ok
    assert is_strong_adaptation(atv_s0, empty).ok


def test_unknown_ids_rejected(atv_s0):
    with pytest.raises(ValueError):
        is_weak_adaptation(atv_s0, AdaptRelation(frozenset({("zz", "r0")})))


# ---------------------------------------------------------------------------
# Per-state queries


def test_state_adaptable_examples(atv_s0, atv_s1):
    assert state_adaptable(atv_s0, "3", "r0", "strong") is True
    assert state_adaptable(atv_s1, "3", "r0", "strong") is False
    assert state_adaptable(atv_s1, "3", "r0", "weak") is True


def test_state_adaptable_preconditions(atv_s0):
    with pytest.raises(PreconditionError):
        state_adaptable(atv_s0, "8", "r0", "weak")  # 8 has c=1
    with pytest.raises(PreconditionError):
        state_adaptable(atv_s0, "77", "r0", "weak")
    with pytest.raises(ValueError):
        state_adaptable(atv_s0, "3", "r0", "sideways")


def test_state_adaptable_off_reachable_pair(bone_s0):
    # (0_2_0, r2) is not reachable steadily from the initial state
    assert ("0_2_0", "r2") not in build_flat(bone_s0).steady_pairs()
    assert state_adaptable(bone_s0, "0_2_0", "r2", "strong") is True


# ---------------------------------------------------------------------------
# Properties of the relation algebra


def _random_systems(seed, count, max_b=10):
    rng = random.Random(seed)
    for _ in range(count):
        yield gen_random(rng.randrange(10**6), rng.randint(1, max_b),
                         rng.randint(1, 4), rng.uniform(0.05, 1.0))


def _shrunk_accepted(sys_, base, checker, rng):
    pairs = set(base.pairs)
    order = sorted(pairs)
    rng.shuffle(order)
    for p in order:
        trial = AdaptRelation(frozenset(pairs - {p}))
        if checker(sys_, trial).ok:
            pairs.discard(p)
            if rng.random() < 0.5:
                break
    return AdaptRelation(frozenset(pairs))


def test_union_closure_weak_and_strong():
    rng = random.Random(321)
    for sys_ in _random_systems(900, 40):
        rw = weak_relation(sys_)
        r1 = _shrunk_accepted(sys_, rw, is_weak_adaptation, rng)
        r2 = _shrunk_accepted(sys_, rw, is_weak_adaptation, rng)
        union = AdaptRelation(r1.pairs | r2.pairs)
        assert is_weak_adaptation(sys_, union).ok
        gs = greatest_strong_relation(sys_)
        s1 = _shrunk_accepted(sys_, gs, is_strong_adaptation, rng)
        s2 = _shrunk_accepted(sys_, gs, is_strong_adaptation, rng)
        assert is_strong_adaptation(sys_, AdaptRelation(s1.pairs | s2.pairs)).ok


def test_strong_implies_weak():
    for sys_ in _random_systems(901, 60):
        rw = weak_relation(sys_)
        assert greatest_strong_relation(sys_).pairs <= rw.pairs
        sr = strong_relation(sys_)
        if sr is not None:
            assert sr.pairs <= rw.pairs


def test_strong_propagates_to_reachable_steady_pairs():
    for sys_ in _random_systems(902, 60):
        gs = greatest_strong_relation(sys_)
        if (sys_.b.initial, sys_.s.initial) in gs:
            assert build_flat(sys_).steady_pairs() <= gs.pairs


def test_computed_relations_self_verify(bundled):
    for sys_ in bundled.values():
        assert is_weak_adaptation(sys_, weak_relation(sys_)).ok
        assert is_strong_adaptation(sys_, greatest_strong_relation(sys_)).ok
        sr = strong_relation(sys_)
        if sr is not None:
            assert is_strong_adaptation(sys_, sr).ok


def test_weak_relation_is_greatest():
    rng = random.Random(903)
    for sys_ in _random_systems(904, 40):
        rw = weak_relation(sys_)
        accepted = _shrunk_accepted(sys_, rw, is_weak_adaptation, rng)
        assert accepted.pairs <= rw.pairs


def test_paper_relations_below_computed(atv_s0, atv_s1, bone_s0, bone_s1):
    assert ATV_S0_PAIRS <= weak_relation(atv_s0).pairs
    assert ATV_S1_WEAK_PAIRS <= weak_relation(atv_s1).pairs
    assert BONE_S0_PAIRS <= weak_relation(bone_s0).pairs
    assert BONE_S1_WEAK_PAIRS <= weak_relation(bone_s1).pairs


def test_prop5_bridge_on_random_systems():
    from sbcheck.adapt import STRONG_FORMULA
    for sys_ in _random_systems(905, 80):
        k = to_kripke(build_flat(sys_))
        assert (strong_relation(sys_) is not None) == \
            (k.initial in sat_set(k, STRONG_FORMULA))


def test_fixpoints_equal_union_of_all_accepted_relations():
    # exhaustive subset enumeration on tiny grids: the computed relations
    # must equal the union of every relation the clause checkers accept
    from itertools import combinations
    count = 0
    for sys_ in _random_systems(906, 120, max_b=4):
        grid = sorted(
            (q, r)
            for q in sys_.b.states for r in sys_.s.states
            if sys_.sat(q, sys_.s.label(r)))
        if len(grid) > 8:
            continue
        count += 1
        union_weak = set()
        union_strong = set()
        for size in range(1, len(grid) + 1):
            for combo in combinations(grid, size):
                rel = AdaptRelation(frozenset(combo))
                if is_weak_adaptation(sys_, rel).ok:
                    union_weak |= rel.pairs
                if is_strong_adaptation(sys_, rel).ok:
                    union_strong |= rel.pairs
        assert weak_relation(sys_).pairs == frozenset(union_weak), sys_.name
        assert greatest_strong_relation(sys_).pairs == frozenset(union_strong), sys_.name
    assert count >= 60


# ---------------------------------------------------------------------------
# A documented boundary case of the two weak-adaptability routes


def test_weak_routes_can_diverge_on_doomed_escape_credit():
    # The logical route accepts a run that adapts forever while every visited
    # state keeps an escape path to some steady state; the relational route
    # additionally demands that a completed phase lands on a pair that stays
    # coherent forever.  Here the only phase endpoint leads into a dead end,
    # so the two routes disagree by design of their definitions.
    sig = Signature([("x", BoundedInt(0, 2))])
    b = BLevel(
        [BState("q0", {"x": 0}), BState("a1", {"x": 2}), BState("a2", {"x": 2}),
         BState("a3", {"x": 2}), BState("e", {"x": 1}), BState("d", {"x": 1})],
        "q0",
        [("q0", "a1"), ("a1", "a2"), ("a2", "a1"), ("a2", "a3"),
         ("a3", "e"), ("e", "d")],
    )
    s = SLevel(
        [("r0", parse_formula("x == 0", sig)), ("r1", parse_formula("x == 1", sig))],
        "r0",
        [STransition("r0", parse_formula("true", sig), "r1")],
    )
    sys_ = SBSystem("doomed_escape", sig, b, s)
    assert check_weak(sys_).holds is True
    assert ("q0", "r0") not in weak_relation(sys_)
    # the strong routes agree with each other here
    assert check_strong(sys_).holds is False
    assert strong_relation(sys_) is None
