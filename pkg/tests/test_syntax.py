import itertools

import pytest
from hypothesis import given, settings, strategies as st

from isokernel.syntax import (
    BOOL,
    SET,
    BIJ,
    And,
    App,
    ClassLevel,
    ConstBij,
    ConstSet,
    Context,
    ContextError,
    Eq,
    Forall,
    Iff,
    Implies,
    IsoEq,
    Lambda,
    Not,
    Or,
    Pair,
    ParseError,
    Pi,
    Proj,
    SetLevel,
    Sigma,
    Sub,
    Var,
    alpha_eq,
    classify_level,
    free_vars,
    fresh_name,
    parse,
    parse_context,
    render,
    render_context,
    substitute,
)

NAMES = ["a", "b", "s"]


def exprs(max_leaves=12):
    leaves = st.one_of(
        st.sampled_from([SET, BOOL, BIJ]),
        st.sampled_from(NAMES).map(Var),
    )

    def extend(inner):
        name = st.sampled_from(NAMES)
        return st.one_of(
            st.builds(Pair, inner, inner),
            st.builds(Proj, st.sampled_from([1, 2]), inner),
            st.builds(App, inner, inner),
            st.builds(Eq, inner, inner),
            st.builds(IsoEq, inner, inner, inner),
            st.builds(Not, inner),
            st.builds(Or, inner, inner),
            st.builds(And, inner, inner),
            st.builds(Implies, inner, inner),
            st.builds(Iff, inner, inner),
            st.builds(Lambda, name, inner, inner),
            st.builds(Forall, name, inner, inner),
            st.builds(Pi, name, inner, inner),
            st.builds(Sigma, name, inner, inner),
            st.builds(Sub, name, inner, inner),
        )

    return st.recursive(leaves, extend, max_leaves=max_leaves)


# -- parsing ----------------------------------------------------------------


def test_magma_parses_to_sigma_over_an_arrow():
    e = parse("Sigma (s:Set) ((s * s) -> s)")
    assert isinstance(e, Sigma) and e.domain == SET
    arrow = e.body
    assert isinstance(arrow, Pi)
    assert isinstance(arrow.domain, Sigma)
    assert arrow.domain.domain == Var(e.var) and arrow.domain.body == Var(e.var)
    assert arrow.body == Var(e.var)
    assert arrow.var not in free_vars(arrow.body)


def test_projection_of_a_pair():
    assert parse("pi1 (x, y)") == Proj(1, Pair(Var("x"), Var("y")))


def test_exists_is_double_negated_forall():
    e = parse("exists (x:Bool) x")
    assert isinstance(e, Not) and isinstance(e.arg, Forall)
    inner = e.arg
    assert inner.domain == BOOL and inner.body == Not(Var(inner.var))


def test_application_with_several_arguments_builds_a_pair():
    assert parse("f(a, b)") == App(Var("f"), Pair(Var("a"), Var("b")))


def test_precedence_from_loosest_to_tightest():
    e = parse("a <=> b => c \\/ d /\\ ~e")
    assert isinstance(e, Iff)
    assert isinstance(e.rhs, Implies)
    assert isinstance(e.rhs.rhs, Or)
    assert isinstance(e.rhs.rhs.rhs, And)
    assert isinstance(e.rhs.rhs.rhs.rhs, Not)


def test_implication_and_arrow_are_right_associative():
    e = parse("a => b => c")
    assert isinstance(e.rhs, Implies)
    t = parse("s -> s -> s")
    assert isinstance(t.body, Pi)
    p = parse("s * s * s")
    assert isinstance(p.body, Sigma)


def test_typed_equality():
    e = parse("x =[Sigma (s : Set) s] y")
    assert isinstance(e, IsoEq) and isinstance(e.type, Sigma)


def test_parse_error_reports_position_and_expectations():
    with pytest.raises(ParseError) as info:
        parse("Sigma (s : Set")
    err = info.value
    assert err.line == 1 and err.col >= 1
    assert ")" in err.expected


def test_parse_error_on_bad_character():
    with pytest.raises(ParseError):
        parse("x @ y")


def test_binders_are_renamed_apart():
    e = parse("fun (x : Bool) => fun (x : Bool) => x")
    assert e.var != e.body.var
    assert e.body.body == Var(e.body.var)


def test_parse_avoids_context_names():
    e = parse("fun (x : Bool) => x", avoid={"x"})
    assert e.var != "x"


# -- printing ---------------------------------------------------------------


def test_non_dependent_arrow_and_product_abbreviations():
    assert render(Pi("x", BOOL, BOOL)) == "Bool -> Bool"
    assert render(Sigma("x", BOOL, BOOL)) == "Bool * Bool"
    assert render(Var("z")) == "z"


def test_exists_is_resugared():
    assert render(parse("exists (x : Bool) x")).startswith("exists")


@settings(max_examples=400, deadline=None)
@given(exprs())
def test_render_then_parse_is_alpha_equivalent(e):
    assert alpha_eq(parse(render(e)), e)


# -- levels -----------------------------------------------------------------


FORMULA_NODES = (Eq, IsoEq, Forall, Not, Or, And, Implies, Iff)


def occurs_outside_formulas(e) -> bool:
    """Independent walker: does Set or Bij occur somewhere not under a formula?"""
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, (ConstSet, ConstBij)):
            return True
        if isinstance(node, FORMULA_NODES):
            continue
        if isinstance(node, Sub):
            stack.append(node.domain)
            continue
        for name in ("fst", "snd", "arg", "fun", "domain", "body", "lhs", "rhs", "type"):
            child = getattr(node, name, None)
            if child is not None and not isinstance(child, (str, int)):
                stack.append(child)
    return False


def test_level_examples():
    assert classify_level(parse("Sigma (s:Set) ((s*s)->s)")) is ClassLevel
    assert classify_level(parse("Bool -> Bool")) is SetLevel
    assert classify_level(parse("Sub (x:Bool) (forall (s:Set) x)")) is SetLevel


def small_exprs(depth):
    """Every expression up to `depth` over a tiny alphabet."""
    level = [SET, BOOL, Var("x")]
    for _ in range(depth - 1):
        new = list(level)
        for a in level:
            new += [Not(a), Proj(1, a)]
        for a, b in itertools.product(level, repeat=2):
            new += [Pair(a, b), Eq(a, b), Sigma("y", a, b), Sub("y", a, b), Forall("y", a, b)]
        level = list(dict.fromkeys(new))
    return level


def test_level_agrees_with_walker_exhaustively():
    cases = small_exprs(3)
    assert len(cases) > 10000
    for e in cases:
        expected = ClassLevel if occurs_outside_formulas(e) else SetLevel
        assert classify_level(e) is expected, render(e)


@settings(max_examples=300, deadline=None)
@given(exprs())
def test_level_agrees_with_walker_on_random_trees(e):
    expected = ClassLevel if occurs_outside_formulas(e) else SetLevel
    assert classify_level(e) is expected


# -- substitution -----------------------------------------------------------


def test_substitution_examples():
    assert substitute(Var("s1"), {"s1": Proj(1, Var("u"))}) == Proj(1, Var("u"))
    lam = Lambda("x", BOOL, Var("x"))
    assert substitute(lam, {"x": Var("y")}) == lam
    out = substitute(Forall("x", Var("s"), Eq(Var("x"), Var("y"))), {"y": Var("x")})
    assert isinstance(out, Forall) and out.var != "x"
    assert out.body == Eq(Var(out.var), Var("x"))


def test_free_variable_examples():
    assert free_vars(Lambda("x", BOOL, Var("x"))) == frozenset()
    assert free_vars(Sigma("s", SET, Pi("_", Var("s"), Var("w")))) == {"w"}
    assert free_vars(Eq(Var("a"), Var("b"))) == {"a", "b"}


@settings(max_examples=300, deadline=None)
@given(exprs())
def test_empty_substitution_is_identity(e):
    assert substitute(e, {}) == e


@settings(max_examples=300, deadline=None)
@given(exprs(), exprs(6), exprs(6))
def test_sequential_substitution_matches_simultaneous(e, a, b):
    # x and y are distinct and b does not mention x.
    if "a" in free_vars(b):
        return
    seq = substitute(substitute(e, {"a": a}), {"b": b})
    sim = substitute(e, {"a": substitute(a, {"b": b}), "b": b})
    assert alpha_eq(seq, sim)


@settings(max_examples=300, deadline=None)
@given(exprs(), exprs(6))
def test_substitution_free_variables(e, a):
    out = substitute(e, {"a": a})
    expected = (free_vars(e) - {"a"}) | (free_vars(a) if "a" in free_vars(e) else frozenset())
    assert free_vars(out) == expected


def test_fresh_name_strips_numeric_suffix():
    assert fresh_name("x", {"x"}) == "x_1"
    assert fresh_name("x_1", {"x", "x_1"}) == "x_2"
    assert fresh_name("y", set()) == "y"


# -- contexts ---------------------------------------------------------------


def test_context_file_parsing():
    ctx = parse_context("# a magma\nM : Sigma (s : Set) ((s * s) -> s)\n\nx : pi1 M\nassume x = x\n")
    assert ctx.names == {"M", "x"}
    assert len(ctx.entries) == 3
    again = parse_context(render_context(ctx))
    assert again == ctx


def test_context_rejects_duplicates_and_undeclared_names():
    with pytest.raises(ContextError):
        Context().declare("x", BOOL).declare("x", BOOL)
    with pytest.raises(ContextError):
        Context().declare("x", Var("s"))
    with pytest.raises(ParseError) as info:
        parse_context("x : Bool\nx : Bool")
    assert "twice" in str(info.value)
    with pytest.raises(ParseError):
        parse_context("x : s")


def test_context_parse_error_carries_line_number():
    with pytest.raises(ParseError) as info:
        parse_context("x : Bool\ny : (")
    assert info.value.line == 2


def test_bind_renames_on_clash():
    ctx = Context().declare("x", BOOL)
    inner, name, body = ctx.bind("x", BOOL, Var("x"))
    assert name != "x" and body == Var(name)
    assert inner.names == {"x", name}
