"""Standard classes and judgments used by the self-tests and examples."""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import Context, Expr, parse, parse_context

MAGMA = "Sigma (s : Set) ((s * s) -> s)"


def _op(g: str) -> str:
    return f"(pi2 {g})"


def group_axioms(g: str) -> str:
    op, car = _op(g), f"pi1 {g}"
    assoc = (
        f"forall (a : {car}) forall (b : {car}) forall (c : {car}) "
        f"{op}({op}(a, b), c) = {op}(a, {op}(b, c))"
    )
    unit = f"forall (a : {car}) ({op}(e, a) = a /\\ {op}(a, e) = a)"
    inverse = f"forall (a : {car}) exists (b : {car}) ({op}(a, b) = e /\\ {op}(b, a) = e)"
    return f"({assoc}) /\\ (exists (e : {car}) (({unit}) /\\ ({inverse})))"


GROUP = f"Sub (G : {MAGMA}) ({group_axioms('G')})"

# Magmas whose carrier has exactly two elements.
TWO_ELEMENT_MAGMA = (
    f"Sub (M : {MAGMA}) "
    "(exists (a : pi1 M) exists (b : pi1 M) (~(a = b) /\\ forall (c : pi1 M) (c = a \\/ c = b)))"
)


def _action_axioms() -> str:
    op, car = _op("G"), "pi1 G"
    unit = (
        f"forall (e : {car}) ((forall (a : {car}) {op}(e, a) = a) => "
        "forall (y : X) act(e)(y) = y)"
    )
    compat = (
        f"forall (g : {car}) forall (h : {car}) forall (y : X) "
        f"act({op}(g, h))(y) = act(g)(act(h)(y))"
    )
    return f"({unit}) /\\ ({compat})"


GROUP_ACTION = f"Sigma (G : {GROUP}) Sigma (X : Set) Sub (act : (pi1 G) -> (X -> X)) ({_action_axioms()})"

# A class over a class: unary algebras together with a map from their carrier into another set.
UNARY_WITH_MAP = "Sigma (A : Sigma (s : Set) (s -> s)) Sigma (t : Set) ((pi1 A) -> t)"

POINTED_SET = "Sigma (s : Set) s"


@dataclass(frozen=True)
class Judgment:
    """A typing judgment  ctx; x : sigma |= e : tau  with x not free in tau."""

    name: str
    ctx: Context
    var: str
    sigma: Expr
    expr: Expr
    tau: Expr


def _judgment(name: str, var: str, sigma: str, expr: str, tau: str, ctx: str = "") -> Judgment:
    c = parse_context(ctx)
    scope = set(c.names) | {var}
    return Judgment(name, c, var, parse(sigma, scope), parse(expr, scope), parse(tau, scope))


FUNCTOR_CORPUS: tuple[Judgment, ...] = (
    _judgment("magma-carrier", "M", MAGMA, "pi1 M", "Set"),
    _judgment("magma-identity", "M", MAGMA, "(pi1 M, pi2 M)", MAGMA),
    _judgment("endomaps", "x", "Set", "x -> x", "Set"),
    _judgment("square", "x", "Set", "x * x", "Set"),
    _judgment("predicates", "x", "Set", "x -> Bool", "Set"),
    _judgment("diagonal", "x", "Set", "Sub (p : x * x) (pi1 p = pi2 p)", "Set"),
    _judgment("with-identity-map", "x", "Set", "(x, fun (y : x) => y)", "Sigma (s : Set) (s -> s)"),
    _judgment("pointed-carrier", "P", POINTED_SET, "pi1 P", "Set"),
    _judgment("negation", "b", "Bool", "~b", "Bool"),
    _judgment(
        "commutative",
        "M",
        MAGMA,
        "forall (a : pi1 M) forall (b : pi1 M) (pi2 M)(a, b) = (pi2 M)(b, a)",
        "Bool",
    ),
    _judgment(
        "has-left-unit",
        "M",
        MAGMA,
        "exists (e : pi1 M) forall (a : pi1 M) (pi2 M)(e, a) = a",
        "Bool",
    ),
    _judgment(
        "iterate-twice",
        "A",
        "Sigma (s : Set) (s -> s)",
        "(pi1 A, fun (a : pi1 A) => (pi2 A)((pi2 A)(a)))",
        "Sigma (s : Set) (s -> s)",
    ),
    _judgment("group-carrier", "G", GROUP, "pi1 G", "Set"),
    _judgment("maps-into-fixed-set", "x", "Set", "x -> t", "Set", ctx="t : Set"),
    _judgment("pair-with-fixed-point", "x", "Set", "(x, y)", "Sigma (s : Set) Bool", ctx="y : Bool"),
)


def magma() -> Expr:
    return parse(MAGMA)
