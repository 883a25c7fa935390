import itertools

import pytest
from hypothesis import given, settings, strategies as st

from isokernel import corpus
from isokernel.iso import (
    NoWitness,
    NotAStructureType,
    PreconditionFailed,
    UnknownCarrier,
    bijections,
    classify,
    congruence_all_pairs,
    congruence_check,
    cryptomorphize,
    eq_formula,
    semantic_iso,
    structure_iso,
    structure_iso_values,
    structure_type,
    witness_for,
)
from isokernel.semantics import Env, Mode, UniverseConfig, engine, star
from isokernel.syntax import BIJ, BOOL, SET, Sigma, Var, parse, parse_context, render
from isokernel.value import FALSE, TRUE, Atom, FunV, PairV, SetV, Side, is_bijective, project

CFG = UniverseConfig(n_atoms=2, max_rank=1)
EXT = CFG.with_mode(Mode.EXTENDED)
EMPTY = parse_context("")
MAGMA = parse(corpus.MAGMA)
a0, a1 = Atom(0), Atom(1)
CARRIER = SetV([a0, a1])


def magma(table):
    """A magma on {a0, a1} from a dict (i, j) -> k of atom indices."""
    graph = {PairV(Atom(i), Atom(j)): Atom(k) for (i, j), k in table.items()}
    return PairV(CARRIER, FunV(graph))


def all_tables():
    keys = list(itertools.product(range(2), repeat=2))
    for outs in itertools.product(range(2), repeat=4):
        yield dict(zip(keys, outs))


def conjugate(table, perm):
    return {(perm[i], perm[j]): perm[k] for (i, j), k in table.items()}


def isomorphic_by_brute_force(t1, t2):
    return any(conjugate(t1, p) == t2 for p in itertools.permutations(range(2)))


XOR = {(i, j): i ^ j for i in range(2) for j in range(2)}
XNOR = {(i, j): 1 - (i ^ j) for i in range(2) for j in range(2)}
CONST0 = {(i, j): 0 for i in range(2) for j in range(2)}


# -- star ------------------------------------------------------------------------


def test_star_examples():
    assert star(SET) == BIJ
    assert star(BOOL) == BOOL
    starred = star(MAGMA)
    assert isinstance(starred, Sigma) and starred.domain == BIJ
    assert render(starred) == render(MAGMA).replace("Set", "Bij")


# -- semantic isomorphism ------------------------------------------------------


def test_xor_and_xnor_are_isomorphic():
    assert isomorphic_by_brute_force(XOR, XNOR)
    w = witness_for(MAGMA, {}, magma(XOR), magma(XNOR), CFG)
    assert w
    assert project(w.value, Side.LEFT) == magma(XOR)
    assert project(w.value, Side.RIGHT) == magma(XNOR)
    assert is_bijective(w.value)
    assert engine(EXT).member_of(star(MAGMA), Env(), w.value)


def test_constant_table_is_not_isomorphic_to_xor():
    assert not isomorphic_by_brute_force(CONST0, XOR)
    assert witness_for(MAGMA, {}, magma(CONST0), magma(XOR), CFG) is NoWitness


def test_semantic_iso_on_expressions():
    ctx = parse_context("s : Set\nt : Set")
    gamma = {"s": SetV([a0]), "t": SetV([a0, a1])}
    assert semantic_iso(ctx, Var("s"), Var("t"), SET, gamma, CFG) is NoWitness
    w = semantic_iso(ctx, Var("s"), Var("s"), SET, gamma, CFG)
    assert w and w.value == SetV([a0])
    with pytest.raises(PreconditionFailed):
        semantic_iso(ctx, Var("s"), Var("t"), BOOL, gamma, CFG)


def test_isomorphism_agrees_with_brute_force_on_all_tables():
    tables = list(all_tables())
    for t1, t2 in itertools.product(tables, repeat=2):
        found = bool(witness_for(MAGMA, {}, magma(t1), magma(t2), CFG))
        assert found == isomorphic_by_brute_force(t1, t2)


def test_isomorphism_is_an_equivalence_on_magmas():
    sem = engine(CFG)
    members = sem.members(sem.denote(MAGMA, Env()))
    iso = {(a, b): sem.iso_witness(MAGMA, Env(), a, b) is not None for a in members for b in members}
    for a in members:
        assert iso[a, a]
    for a, b in itertools.product(members, repeat=2):
        assert iso[a, b] == iso[b, a]
    for a, b, c in itertools.product(members, repeat=3):
        if iso[a, b] and iso[b, c]:
            assert iso[a, c]


# -- the EQ formula and the structure rule -------------------------------------------


def test_eq_formula_examples():
    x, y = Var("x"), Var("y")
    assert render(eq_formula(BOOL, {}, x, {}, y, [])) == "x = y"
    assert render(eq_formula(Var("s1"), {}, x, {}, y, [("s1", "f1")])) == "f1(x) = y"
    ty = parse("(s1 * s1) -> s1", {"s1"})
    phi = eq_formula(ty, {"s1": Var("a")}, x, {"s1": Var("b")}, y, [("s1", "f1")])
    assert render(phi) == (
        "forall (p : a * a) forall (q : b * b) "
        "f1(pi1 p) = pi1 q /\\ f1(pi2 p) = pi2 q => f1(x(p)) = y(q)"
    )


def test_eq_formula_rejects_unknown_carriers():
    with pytest.raises(UnknownCarrier):
        eq_formula(Var("t"), {}, Var("x"), {}, Var("y"), [("s1", "f1")])


def test_structure_type_recognition():
    st_ = structure_type(MAGMA)
    assert len(st_.carriers) == 1
    assert structure_type(BOOL).carriers == ()
    with pytest.raises(NotAStructureType):
        structure_type(parse("Sigma (M : Sigma (s : Set) s) Bool"))


def test_structure_rule_examples():
    st_ = structure_type(MAGMA)
    ok, maps = structure_iso_values(st_, magma(XOR), magma(XNOR), CFG)
    assert ok and maps[0] == FunV({a0: a1, a1: a0})
    assert not structure_iso_values(st_, magma(CONST0), magma(XOR), CFG)[0]


def test_structure_rule_without_carriers_is_equality():
    ctx = parse_context("b : Bool\nc : Bool")
    for gb, gc in itertools.product([FALSE, TRUE], repeat=2):
        ok, _ = structure_iso(ctx, BOOL, Var("b"), Var("c"), {"b": gb, "c": gc}, CFG)
        assert ok == (gb == gc)


def test_structure_rule_matches_semantic_iso_on_magmas():
    sem = engine(CFG)
    st_ = structure_type(MAGMA)
    members = sem.members(sem.denote(MAGMA, Env()))
    for a, b in itertools.product(members, repeat=2):
        assert structure_iso_values(st_, a, b, CFG)[0] == bool(witness_for(MAGMA, {}, a, b, CFG))


def test_bijection_enumeration():
    assert bijections(SetV([a0]), CARRIER) == []
    assert len(bijections(CARRIER, CARRIER)) == 2


# -- classification ------------------------------------------------------------------------


def test_finite_sets_classify_by_cardinality():
    classes = classify(EMPTY, SET, {}, CFG)
    assert [c.orbit for c in classes] == [1, 2, 1]
    assert [len(c.representative) for c in classes] == [0, 1, 2]


def test_bool_has_two_classes():
    classes = classify(EMPTY, BOOL, {}, CFG)
    assert [c.representative for c in classes] == [FALSE, TRUE]


def test_two_element_magmas_burnside():
    tables = list(all_tables())
    orbits = {frozenset(tuple(sorted(conjugate(t, p).items())) for p in itertools.permutations(range(2))) for t in tables}
    fixed = sum(1 for p in itertools.permutations(range(2)) for t in tables if conjugate(t, p) == t)
    assert len(orbits) == fixed // 2 == 10
    classes = classify(EMPTY, parse(corpus.TWO_ELEMENT_MAGMA), {}, CFG)
    assert len(classes) == 10
    assert sum(c.orbit for c in classes) == 16
    assert sorted(c.orbit for c in classes) == sorted(len(o) for o in orbits)


def union_find_classes(members, iso):
    parent = {m: m for m in members}

    def find(m):
        while parent[m] != m:
            m = parent[m]
        return m

    for a, b in itertools.combinations(members, 2):
        if iso(a, b):
            parent[find(a)] = find(b)
    groups = {}
    for m in members:
        groups.setdefault(find(m), []).append(m)
    return sorted((min(g), len(g)) for g in groups.values())


@settings(max_examples=10, deadline=None)
@given(st.randoms(use_true_random=False))
def test_classification_ignores_enumeration_order(rng):
    sem = engine(CFG)
    members = list(sem.members(sem.denote(MAGMA, Env())))
    rng.shuffle(members)
    expected = union_find_classes(members, lambda a, b: bool(witness_for(MAGMA, {}, a, b, CFG)))
    got = [(c.representative, c.orbit) for c in classify(EMPTY, MAGMA, {}, CFG)]
    assert got == expected


# -- congruence ------------------------------------------------------------------------------


def test_identity_functor_passes():
    ctx = parse_context("u : Set\nv : Set")
    result = congruence_check(ctx, "x", SET, Var("x"), SET, Var("u"), Var("v"), CFG)
    assert result and result.checked == 6


def test_magma_carrier_functor_passes():
    ctx = parse_context(f"u : {corpus.MAGMA}\nv : {corpus.MAGMA}")
    result = congruence_check(ctx, "M", MAGMA, parse("pi1 M", {"M"}), SET, Var("u"), Var("v"), CFG)
    assert result
    # Oracle: isomorphic magmas have equinumerous carriers, so the count is the number of isomorphic pairs.
    sem = engine(CFG)
    members = sem.members(sem.denote(MAGMA, Env()))
    pairs = sum(1 for a, b in itertools.product(members, repeat=2) if bool(witness_for(MAGMA, {}, a, b, CFG)))
    assert result.checked == pairs


def test_ill_formed_body_is_refused():
    ctx = parse_context("s : Set\nx : s\nS : Sigma (w : Set) w")
    e = parse("x = pi2 S", ctx.names | {"z"})
    with pytest.raises(PreconditionFailed):
        congruence_all_pairs(ctx, "z", BOOL, e, BOOL, CFG)


def test_side_condition_on_tau():
    with pytest.raises(PreconditionFailed):
        congruence_all_pairs(EMPTY, "x", SET, Var("x"), Var("x"), CFG)


def test_congruence_over_all_pairs_for_endomaps():
    result = congruence_all_pairs(EMPTY, "x", SET, parse("x -> x", {"x"}), SET, CFG)
    assert result and result.checked == 6


# -- cryptomorphisms -------------------------------------------------------------------------


def test_set_level_expression_is_its_own_structure():
    c = cryptomorphize(EMPTY, BOOL)
    assert c.identity and c.target.carriers == () and c.target.body == BOOL
    assert c.forward(TRUE) == TRUE


def test_set_becomes_a_set_with_a_true_proposition():
    c = cryptomorphize(EMPTY, SET)
    assert len(c.target.carriers) == 1
    assert isinstance(c.target.expr, Sigma) and c.target.expr.domain == SET
    s = SetV([a0])
    assert c.forward(s) == PairV(s, TRUE)
    assert c.backward(PairV(s, TRUE)) == s


def test_group_action_gets_two_carriers():
    c = cryptomorphize(EMPTY, parse(corpus.GROUP_ACTION))
    assert len(c.target.carriers) == 2
