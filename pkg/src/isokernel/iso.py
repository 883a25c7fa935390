"""Isomorphism: witness search, the structure rule, cryptomorphisms, classification."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .semantics import (
    BoundsTooLarge,
    Env,
    Mode,
    UniverseConfig,
    engine,
    interpretations,
    models_type,
    star,
    truth,
)
from .syntax import (
    BOOL,
    SET,
    And,
    App,
    ConstSet,
    Context,
    Decl,
    Eq,
    Expr,
    Forall,
    Implies,
    Pair,
    Pi,
    Proj,
    Sigma,
    Sub,
    Var,
    bound_vars,
    contains_bij,
    fresh_name,
    free_vars,
    is_set_level,
    render,
    substitute,
)
from .value import TRUE, FunV, PairV, SetV, Value, to_json


class UnknownCarrier(ValueError):
    pass


class NotAStructureType(ValueError):
    pass


class NotAClass(ValueError):
    pass


class PreconditionFailed(ValueError):
    pass


@dataclass(frozen=True)
class IsoWitness:
    value: Value
    left: Value
    right: Value

    def __bool__(self) -> bool:
        return True


class _NoWitness:
    def __bool__(self) -> bool:
        return False

    def __repr__(self) -> str:
        return "NoWitness"


NoWitness = _NoWitness()


def _base(cfg: UniverseConfig) -> UniverseConfig:
    return cfg.with_mode(Mode.BASE)


def _env(gamma: Mapping[str, Value]) -> Env:
    return gamma if isinstance(gamma, Env) else Env(gamma)


def _context_exprs(ctx: Context) -> list[Expr]:
    return [e.type if isinstance(e, Decl) else e.formula for e in ctx.entries]


# ---------------------------------------------------------------------------
# Semantic isomorphism


def witness_for(ty: Expr, gamma: Mapping[str, Value], a: Value, b: Value, cfg: UniverseConfig) -> IsoWitness | _NoWitness:
    """Search the starred type for a bijective value whose faces are `a` and `b`."""
    w = engine(_base(cfg)).iso_witness(ty, _env(gamma), a, b)
    return NoWitness if w is None else IsoWitness(w, a, b)


def semantic_iso(
    ctx: Context,
    u: Expr,
    v: Expr,
    ty: Expr,
    gamma: Mapping[str, Value],
    cfg: UniverseConfig,
    check: bool = True,
) -> IsoWitness | _NoWitness:
    base = _base(cfg)
    if any(contains_bij(x) for x in [u, v, ty, *_context_exprs(ctx)]):
        raise PreconditionFailed("isomorphism is defined for the base language only")
    if check and not (models_type(ctx, u, ty, base) and models_type(ctx, v, ty, base)):
        raise PreconditionFailed(f"both sides must have type {render(ty)}")
    sem = engine(base)
    env = _env(gamma)
    return witness_for(ty, env, sem.denote(u, env), sem.denote(v, env), cfg)


# ---------------------------------------------------------------------------
# Structure types and the EQ formula


@dataclass(frozen=True)
class StructureType:
    carriers: tuple[str, ...]
    body: Expr

    @property
    def expr(self) -> Expr:
        e = self.body
        for c in reversed(self.carriers):
            e = Sigma(c, SET, e)
        return e

    def carrier_exprs(self, u: Expr) -> dict[str, Expr]:
        """s_k is read off as pi1 (pi2^(k-1) u)."""
        out = {}
        for c in self.carriers:
            out[c] = Proj(1, u)
            u = Proj(2, u)
        return out

    def body_expr(self, u: Expr) -> Expr:
        for _ in self.carriers:
            u = Proj(2, u)
        return u

    def split(self, v: Value) -> tuple[list[Value], Value]:
        cs = []
        for _ in self.carriers:
            cs.append(v.fst)
            v = v.snd
        return cs, v

    def join(self, cs: Sequence[Value], body: Value) -> Value:
        for c in reversed(cs):
            body = PairV(c, body)
        return body


def structure_type(e: Expr) -> StructureType:
    carriers = []
    while not is_set_level(e):
        if not (isinstance(e, Sigma) and isinstance(e.domain, ConstSet)):
            raise NotAStructureType(f"{render(e)} is not of the form Sigma (s:Set) ... with a set-level body")
        carriers.append(e.var)
        e = e.body
    return StructureType(tuple(carriers), e)


def eq_formula(
    ty: Expr,
    xdot: Mapping[str, Expr],
    x: Expr,
    ydot: Mapping[str, Expr],
    y: Expr,
    carriers: Sequence[tuple[str, str]],
    known: Iterable[str] = (),
) -> Expr:
    """The formula saying that the maps f_i carry x to y along the structure `ty`."""
    fmap = dict(carriers)
    unknown = free_vars(ty) - set(fmap) - set(xdot) - set(ydot) - set(known)
    if unknown:
        raise UnknownCarrier(f"{', '.join(sorted(unknown))} is neither a carrier nor a known variable")
    used = set(fmap.values()) | set(fmap) | set(known) | bound_vars(ty) | free_vars(ty)
    for e in [x, y, *xdot.values(), *ydot.values()]:
        used |= free_vars(e)

    def fresh(base: str) -> str:
        name = fresh_name(base, used)
        used.add(name)
        return name

    def go(t: Expr, xd: dict, xv: Expr, yd: dict, yv: Expr) -> Expr:
        if not (free_vars(t) & fmap.keys()):
            return Eq(xv, yv)
        match t:
            case Var(s):
                return Eq(App(Var(fmap[s]), xv), yv)
            case Sub(_, dom, _):
                return go(dom, xd, xv, yd, yv)
            case Sigma(z, dom, body):
                first = go(dom, xd, Proj(1, xv), yd, Proj(1, yv))
                second = go(body, {**xd, z: Proj(1, xv)}, Proj(2, xv), {**yd, z: Proj(1, yv)}, Proj(2, yv))
                return And(first, second)
            case Pi(z, dom, body):
                p, q = fresh("p"), fresh("q")
                guard = go(dom, xd, Var(p), yd, Var(q))
                result = go(body, {**xd, z: Var(p)}, App(xv, Var(p)), {**yd, z: Var(q)}, App(yv, Var(q)))
                return Forall(p, substitute(dom, xd), Forall(q, substitute(dom, yd), Implies(guard, result)))
        raise NotAStructureType(f"cannot transport along {render(t)}")

    return go(ty, dict(xdot), x, dict(ydot), y)


def bijections(a: SetV, b: SetV) -> list[FunV]:
    if len(a) != len(b):
        return []
    return [FunV(zip(a.elements, perm)) for perm in itertools.permutations(b.elements)]


def structure_iso_values(
    st: StructureType,
    a: Value,
    b: Value,
    cfg: UniverseConfig,
    gamma: Mapping[str, Value] | None = None,
) -> tuple[bool, tuple[FunV, ...] | None]:
    """Decide the structure rule for two values of a structure type."""
    env = _env(gamma or {})
    used = set(env) | set(st.carriers) | free_vars(st.body) | bound_vars(st.body)
    uname = fresh_name("u", used)
    vname = fresh_name("v", used | {uname})
    used |= {uname, vname}
    fnames = []
    for _ in st.carriers:
        fnames.append(fresh_name("f", used))
        used.add(fnames[-1])
    u, v = Var(uname), Var(vname)
    phi = eq_formula(
        st.body,
        st.carrier_exprs(u),
        st.body_expr(u),
        st.carrier_exprs(v),
        st.body_expr(v),
        list(zip(st.carriers, fnames)),
        known=set(env),
    )
    ca, _ = st.split(a)
    cb, _ = st.split(b)
    options = [bijections(x, y) for x, y in zip(ca, cb)]
    total = math.prod(len(o) for o in options)
    if total > cfg.guard_ceiling:
        raise BoundsTooLarge(f"carrier bijections: {total} exceeds guard ceiling {cfg.guard_ceiling}")
    sem = engine(_base(cfg))
    env = env.extend(uname, a).extend(vname, b)
    for combo in itertools.product(*options):
        inner = env
        for name, f in zip(fnames, combo):
            inner = inner.extend(name, f)
        if truth(sem.denote(phi, inner)):
            return True, combo
    return False, None


def structure_iso(
    ctx: Context,
    sigma: Expr | StructureType,
    u: Expr,
    v: Expr,
    gamma: Mapping[str, Value],
    cfg: UniverseConfig,
    check: bool = False,
) -> tuple[bool, tuple[FunV, ...] | None]:
    st = sigma if isinstance(sigma, StructureType) else structure_type(sigma)
    base = _base(cfg)
    if check and not (models_type(ctx, u, st.expr, base) and models_type(ctx, v, st.expr, base)):
        raise PreconditionFailed(f"both sides must have type {render(st.expr)}")
    sem = engine(base)
    env = _env(gamma)
    return structure_iso_values(st, sem.denote(u, env), sem.denote(v, env), cfg, env)


# ---------------------------------------------------------------------------
# Cryptomorphisms


@dataclass(frozen=True)
class _Shape:
    carriers: tuple[str, ...]
    body: Expr
    forward: Callable[[Value], tuple[tuple[Value, ...], Value]]
    backward: Callable[[Sequence[Value], Value], Value]
    rebuild: Callable[[Sequence[Expr], Expr], Expr]


class _Names:
    def __init__(self, used: Iterable[str]):
        self.used = set(used)

    def fresh(self, base: str) -> str:
        name = fresh_name(base, self.used)
        self.used.add(name)
        return name

    def carrier(self) -> str:
        k = 1
        while f"s{k}" in self.used:
            k += 1
        self.used.add(f"s{k}")
        return f"s{k}"


def _identity(e: Expr) -> _Shape:
    return _Shape((), e, lambda v: ((), v), lambda cs, b: b, lambda cs, y: y)


def _shape(e: Expr, names: _Names) -> _Shape:
    if is_set_level(e):
        return _identity(e)
    match e:
        case ConstSet():
            c, p = names.carrier(), names.fresh("P")
            return _Shape(
                (c,),
                Sub(p, BOOL, Var(p)),
                lambda v: ((v,), TRUE),
                lambda cs, b: cs[0],
                lambda cs, y: cs[0],
            )
        case Sub(x, dom, phi):
            inner = _shape(dom, names)
            y = names.fresh("y")
            back = inner.rebuild([Var(c) for c in inner.carriers], Var(y))
            return _Shape(
                inner.carriers,
                Sub(y, inner.body, substitute(phi, {x: back})),
                inner.forward,
                inner.backward,
                inner.rebuild,
            )
        case Sigma(x, dom, rest):
            left = _shape(dom, names)
            right = _shape(rest, names)
            n = len(left.carriers)
            y = names.fresh("y")
            back = left.rebuild([Var(c) for c in left.carriers], Var(y))

            def forward(v: Value) -> tuple[tuple[Value, ...], Value]:
                lc, lb = left.forward(v.fst)
                rc, rb = right.forward(v.snd)
                return lc + rc, PairV(lb, rb)

            def backward(cs: Sequence[Value], b: Value) -> Value:
                return PairV(left.backward(cs[:n], b.fst), right.backward(cs[n:], b.snd))

            def rebuild(cs: Sequence[Expr], z: Expr) -> Expr:
                return Pair(left.rebuild(cs[:n], Proj(1, z)), right.rebuild(cs[n:], Proj(2, z)))

            return _Shape(
                left.carriers + right.carriers,
                Sigma(y, left.body, substitute(right.body, {x: back})),
                forward,
                backward,
                rebuild,
            )
    raise NotAClass(f"{render(e)} is not a class expression built from Set, Sigma and Sub")


@dataclass(frozen=True)
class Cryptomorphism:
    source: Expr
    target: StructureType
    shape: _Shape

    @property
    def identity(self) -> bool:
        return not self.target.carriers and self.target.body == self.source

    def forward(self, v: Value) -> Value:
        cs, body = self.shape.forward(v)
        return self.target.join(cs, body)

    def backward(self, w: Value) -> Value:
        cs, body = self.target.split(w)
        return self.shape.backward(cs, body)


def cryptomorphize(ctx: Context, sigma: Expr, cfg: UniverseConfig | None = None) -> Cryptomorphism:
    """Present a class as a structure type.  Set-level expressions map to themselves."""
    if contains_bij(sigma):
        raise NotAClass("cryptomorphisms are defined for the base language")
    names = _Names(ctx.names | free_vars(sigma) | bound_vars(sigma))
    shape = _shape(sigma, names)
    return Cryptomorphism(sigma, StructureType(shape.carriers, shape.body), shape)


# ---------------------------------------------------------------------------
# Classification


@dataclass(frozen=True)
class IsoClass:
    representative: Value
    orbit: int


def classify(ctx: Context, sigma: Expr, gamma: Mapping[str, Value], cfg: UniverseConfig) -> list[IsoClass]:
    """Partition the members of `sigma` at gamma into isomorphism classes."""
    sem = engine(_base(cfg))
    env = _env(gamma)
    members = sem.members(sem.denote(sigma, env))
    parent = {m: m for m in members}

    def find(m: Value) -> Value:
        while parent[m] != m:
            parent[m] = parent[parent[m]]
            m = parent[m]
        return m

    # Members come sorted, so the root of each class is its least element.
    for i, a in enumerate(members):
        for b in members[i + 1 :]:
            ra, rb = find(a), find(b)
            if ra != rb and sem.iso_witness(sigma, env, a, b) is not None:
                lo, hi = (ra, rb) if ra < rb else (rb, ra)
                parent[hi] = lo
    orbits: dict[Value, int] = {}
    for m in members:
        r = find(m)
        orbits[r] = orbits.get(r, 0) + 1
    return [IsoClass(r, orbits[r]) for r in sorted(orbits)]


def classification_json(classes: list[IsoClass]) -> dict:
    return {
        "classes": [{"representative": to_json(c.representative), "orbit": c.orbit} for c in classes],
        "total": sum(c.orbit for c in classes),
    }


# ---------------------------------------------------------------------------
# Congruence


@dataclass(frozen=True)
class CongruenceResult:
    passed: bool
    checked: int
    counterexample: Env | None = None

    def __bool__(self) -> bool:
        return self.passed


def congruence_check(
    ctx: Context,
    x: str,
    sigma: Expr,
    e: Expr,
    tau: Expr,
    u: Expr,
    v: Expr,
    cfg: UniverseConfig,
) -> CongruenceResult:
    """Check that e[u] and e[v] are isomorphic at tau wherever u and v are isomorphic at sigma."""
    base = _base(cfg)
    if any(contains_bij(t) for t in [sigma, e, tau, u, v, *_context_exprs(ctx)]):
        raise PreconditionFailed("congruence is stated for the base language")
    if x in free_vars(tau):
        raise PreconditionFailed(f"{x} occurs free in {render(tau)}")
    inner, x2, e2 = ctx.bind(x, sigma, e)
    if not models_type(inner, e2, tau, base):
        raise PreconditionFailed(f"{render(e)} does not have type {render(tau)} when {x} : {render(sigma)}")
    if not (models_type(ctx, u, sigma, base) and models_type(ctx, v, sigma, base)):
        raise PreconditionFailed(f"the endpoints must have type {render(sigma)}")
    eu, ev = substitute(e2, {x2: u}), substitute(e2, {x2: v})
    if not (models_type(ctx, eu, tau, base) and models_type(ctx, ev, tau, base)):
        raise PreconditionFailed("the substituted instances are not well-typed")
    sem = engine(base)
    checked = 0
    for env in interpretations(ctx, base):
        if sem.iso_witness(sigma, env, sem.denote(u, env), sem.denote(v, env)) is None:
            continue
        checked += 1
        if sem.iso_witness(tau, env, sem.denote(eu, env), sem.denote(ev, env)) is None:
            return CongruenceResult(False, checked, env)
    return CongruenceResult(True, checked)


def congruence_all_pairs(ctx: Context, x: str, sigma: Expr, e: Expr, tau: Expr, cfg: UniverseConfig) -> CongruenceResult:
    """Congruence for every pair of isomorphic values of `sigma` at every interpretation.

    Evaluating e at x := a is the value of e[u] wherever u denotes a, so the
    pairs are drawn straight from the denotation of sigma instead of from two
    extra context variables.
    """
    base = _base(cfg)
    if any(contains_bij(t) for t in [sigma, e, tau, *_context_exprs(ctx)]):
        raise PreconditionFailed("congruence is stated for the base language")
    if x in free_vars(tau):
        raise PreconditionFailed(f"{x} occurs free in {render(tau)}")
    inner, x2, e2 = ctx.bind(x, sigma, e)
    if not models_type(inner, e2, tau, base):
        raise PreconditionFailed(f"{render(e)} does not have type {render(tau)} when {x} : {render(sigma)}")
    sem = engine(base)
    checked = 0
    for env in interpretations(ctx, base):
        members = sem.members(sem.denote(sigma, env))
        for a in members:
            for b in members:
                if sem.iso_witness(sigma, env, a, b) is None:
                    continue
                checked += 1
                ea, eb = sem.denote(e2, env.extend(x2, a)), sem.denote(e2, env.extend(x2, b))
                if sem.iso_witness(tau, env, ea, eb) is None:
                    used = set(env) | {x2}
                    u = fresh_name("u", used)
                    v = fresh_name("v", used | {u})
                    return CongruenceResult(False, checked, env.extend(u, a).extend(v, b))
    return CongruenceResult(True, checked)
