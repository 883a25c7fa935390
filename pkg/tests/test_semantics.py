import itertools

import pytest

from isokernel.semantics import (
    BoundsTooLarge,
    ClassResult,
    FuelExhausted,
    Mode,
    Semantics,
    Undefined,
    UniverseConfig,
    ValueResult,
    bij_sets,
    context_denotation,
    engine,
    evaluate,
    is_class,
    is_type,
    load_config,
    models_formula,
    models_type,
    universe_sets,
    well_formed,
)
from isokernel.lemmas import base_sweep
from isokernel.syntax import BIJ, BOOL, SET, Lambda, Or, Not, Pi, Var, parse, parse_context
from isokernel.value import BOOL_SET, FALSE, TRUE, Atom, IsoPair, SetV, is_basic

CFG = UniverseConfig(n_atoms=2, max_rank=1)
EXT = CFG.with_mode(Mode.EXTENDED)
EMPTY = parse_context("")


def subsets_oracle(n_atoms, rank, size):
    """Every set of atoms and lower-rank sets, built independently of the engine."""
    atoms = [Atom(k) for k in range(n_atoms)]
    elements = list(atoms)
    sets = []
    for _ in range(rank):
        sets = [SetV(c) for k in range(size + 1) for c in itertools.combinations(elements, k)]
        elements = atoms + sets
    return set(sets)


def bijective_sets_oracle(n_atoms, size):
    atoms = [Atom(k) for k in range(n_atoms)]
    pool = atoms + [IsoPair(a, b) for a in atoms for b in atoms]

    def face(x, i):
        return (x.left, x.right)[i] if isinstance(x, IsoPair) else x

    out = set()
    for k in range(size + 1):
        for c in itertools.combinations(pool, k):
            if all(len({face(x, i) for x in c}) == len(c) for i in (0, 1)):
                out.add(SetV(c))
    return out


# -- the bounded universe ----------------------------------------------------


def test_universe_examples():
    assert universe_sets(UniverseConfig(n_atoms=0, max_rank=1)) == (SetV(),)
    assert len(universe_sets(CFG)) == 4
    assert len(universe_sets(UniverseConfig(n_atoms=1, max_rank=2, max_set_size=1))) == 4


@pytest.mark.parametrize("n,rank,size", [(0, 1, 2), (1, 1, 1), (2, 1, 2), (3, 1, 2), (1, 2, 1), (2, 2, 2), (1, 3, 2)])
def test_universe_matches_subset_oracle(n, rank, size):
    got = universe_sets(UniverseConfig(n_atoms=n, max_rank=rank, max_set_size=size))
    assert len(got) == len(set(got))
    assert set(got) == subsets_oracle(n, rank, size)
    assert list(got) == sorted(got)


def test_bijective_sets():
    got = bij_sets(EXT)
    assert len(got) == 12
    assert set(got) == bijective_sets_oracle(2, 2)
    assert set(universe_sets(CFG)) < set(got)
    assert SetV([IsoPair(Atom(0), Atom(1))]) in got
    assert SetV([IsoPair(Atom(0), Atom(0)), IsoPair(Atom(1), Atom(0))]) not in got


def test_guard_ceiling_trips():
    with pytest.raises(BoundsTooLarge):
        universe_sets(UniverseConfig(n_atoms=4, max_rank=3, max_set_size=4, guard_ceiling=1000))


# -- contexts and values ------------------------------------------------------


def test_context_denotation_examples():
    assert len(context_denotation(EMPTY, 4, CFG)) == 1
    bools = context_denotation(parse_context("x : Bool"), 4, CFG)
    assert sorted(env["x"] for env in bools) == [FALSE, TRUE]
    assumed = context_denotation(parse_context("x : Bool\nassume x"), 6, CFG)
    assert [env["x"] for env in assumed] == [TRUE]
    assert context_denotation(parse_context("x : Bool"), 0, CFG) is Undefined


def test_bool_denotes_the_two_truth_values():
    assert evaluate(EMPTY, BOOL, {}, 2, CFG) == ValueResult(BOOL_SET)
    # Fuel 1 only reaches the empty context itself.
    assert evaluate(EMPTY, BOOL, {}, 1, CFG) is Undefined


def test_set_denotes_a_class():
    d = evaluate(EMPTY, SET, {}, 4, CFG)
    assert isinstance(d, ClassResult) and set(d.members) == set(universe_sets(CFG))
    assert evaluate(EMPTY, BIJ, {}, 4, CFG) is Undefined
    assert len(evaluate(EMPTY, BIJ, {}, 4, EXT).members) == 12


def test_projection_of_a_pair_evaluates():
    ctx = parse_context("x : Bool\ny : Bool")
    e = parse("pi1 (x, y)", ctx.names)
    gamma = {"x": TRUE, "y": FALSE}
    assert evaluate(ctx, e, gamma, 32, CFG) == ValueResult(TRUE)
    # Typing the pair against a Sigma view costs several levels of fuel.
    first = next(i for i in range(32) if evaluate(ctx, e, gamma, i, CFG) is not Undefined)
    assert all(evaluate(ctx, e, gamma, i, CFG) == ValueResult(TRUE) for i in range(first, 32))


def test_interpretation_outside_the_context_is_undefined():
    ctx = parse_context("x : Bool")
    assert evaluate(ctx, Var("x"), {"x": Atom(0)}, 8, CFG) is Undefined


REJECTED = ("s : Set\nx : s\nS : Sigma (w : Set) w", "x = pi2 S")


def test_rejection_at_every_fuel():
    ctx = parse_context(REJECTED[0])
    e = parse(REJECTED[1], ctx.names)
    sem = engine(CFG)
    assert not any(sem.defined(ctx, e, i) for i in range(CFG.max_fuel + 1))
    assert not well_formed(ctx, e, CFG)
    assert not well_formed(ctx, e, EXT)


def test_same_carrier_equality_is_accepted():
    ctx = parse_context("S : Sigma (w : Set) w\nx : pi1 S")
    assert well_formed(ctx, parse("x = pi2 S", ctx.names), CFG)


def test_judgment_examples():
    assert models_type(EMPTY, Lambda("x", BOOL, Var("x")), Pi("x", BOOL, BOOL), CFG)
    ctx = parse_context("x : Bool")
    assert models_formula(ctx, Or(Var("x"), Not(Var("x"))), CFG)
    assert not models_formula(ctx, Var("x"), CFG)
    assert is_class(EMPTY, parse("Sigma (s : Set) ((s * s) -> s)"), CFG)
    assert is_type(EMPTY, parse("Bool -> Bool"), CFG)
    assert not is_class(EMPTY, parse("Bool -> Bool"), CFG)


def test_magma_count():
    # Functions s*s -> s for |s| = 0, 1, 1, 2: 1 + 1 + 1 + 16.
    d = evaluate(EMPTY, parse("Sigma (s : Set) ((s * s) -> s)"), {}, 16, CFG)
    assert len(d.members) == 19


def test_base_values_are_basic():
    ctx = parse_context("s : Set\nx : s")
    sem = engine(CFG)
    for env in sem.context(ctx, 16):
        assert all(is_basic(v) for v in env.values())


# -- fuel ---------------------------------------------------------------------


def test_definedness_is_monotone_in_fuel():
    sweep = base_sweep(CFG)
    for text in ("", "s : Set\nx : s", "b : Bool\nassume b"):
        ctx = parse_context(text)
        exprs = sweep.expressions(ctx, 2)
        fresh = Semantics(CFG)
        for e in exprs:
            seen = False
            for i in range(12):
                now = fresh.defined(ctx, e, i)
                assert now or not seen, (text, e, i)
                seen = now
            assert seen


def test_fuel_exhaustion_is_distinct_from_ill_formed():
    tight = UniverseConfig(n_atoms=2, max_rank=1, max_fuel=2)
    ctx = parse_context("x : Bool\ny : Bool")
    with pytest.raises(FuelExhausted):
        well_formed(ctx, parse("pi1 (x, y)", ctx.names), tight)
    assert well_formed(ctx, parse("pi1 (x, y)", ctx.names), CFG)


# -- configuration --------------------------------------------------------------


def test_config_file(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text('atoms = 3\nmax_rank = 2\nmode = "extended"\n')
    cfg = load_config(str(path))
    assert (cfg.n_atoms, cfg.max_rank, cfg.mode) == (3, 2, Mode.EXTENDED)


def test_config_rejects_negative_bounds():
    with pytest.raises(ValueError):
        UniverseConfig(n_atoms=-1)
