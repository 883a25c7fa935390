"""Fuel-indexed value functions over a bounded universe.

An expression is well-formed exactly when it has a value.  The value
function at fuel i+1 is only defined where the side conditions hold at
fuel i, so every judgment here takes an explicit fuel argument.

Values of defined expressions do not depend on the fuel, so `denote`
computes them compositionally with no fuel at all; the fuel only
governs which expressions are defined.
"""

from __future__ import annotations

import enum
import itertools
import math
import sys
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, Callable, Iterable, Iterator, Mapping

from .syntax import (
    BIJ,
    BOOL,
    SET,
    And,
    App,
    Assume,
    ConstBij,
    ConstBool,
    ConstSet,
    Context,
    Decl,
    Eq,
    Expr,
    Forall,
    Iff,
    Implies,
    IsoEq,
    Lambda,
    Not,
    Or,
    Pair,
    Pi,
    Proj,
    Sigma,
    Sub,
    Var,
    children,
    contains_bij,
    fresh_name,
    free_vars,
    is_set_level,
    rebuild,
    substitute,
)
from .value import (
    BOOL_SET,
    Atom,
    BoolV,
    FunV,
    IsoPair,
    PairV,
    SetV,
    Side,
    Value,
    bool_value,
    is_bijective,
    project,
)


class Mode(enum.Enum):
    BASE = "base"
    EXTENDED = "extended"


Base = Mode.BASE
Extended = Mode.EXTENDED


class BoundsTooLarge(RuntimeError):
    pass


class FuelExhausted(RuntimeError):
    pass


class EvalError(RuntimeError):
    """Raised when `denote` is asked for the value of an ill-formed expression."""


@dataclass(frozen=True)
class UniverseConfig:
    n_atoms: int = 2
    max_rank: int = 1
    max_set_size: int = 2
    max_fuel: int = 1024
    mode: Mode = Mode.BASE
    guard_ceiling: int = 10**6

    def __post_init__(self) -> None:
        for name in ("n_atoms", "max_rank", "max_set_size", "max_fuel", "guard_ceiling"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not isinstance(self.mode, Mode):
            object.__setattr__(self, "mode", Mode(self.mode))

    @property
    def extended(self) -> bool:
        return self.mode is Mode.EXTENDED

    def with_mode(self, mode: Mode) -> "UniverseConfig":
        return replace(self, mode=mode)


CONFIG_KEYS = {
    "atoms": "n_atoms",
    "max_rank": "max_rank",
    "max_set_size": "max_set_size",
    "max_fuel": "max_fuel",
    "mode": "mode",
    "guard_ceiling": "guard_ceiling",
}


def load_config(path: str, base: UniverseConfig | None = None) -> UniverseConfig:
    """Read `atoms`, `max_rank`, `max_set_size`, `max_fuel`, `mode`, `guard_ceiling` from TOML."""
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib

    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    unknown = set(data) - set(CONFIG_KEYS)
    if unknown:
        raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    kwargs = {CONFIG_KEYS[k]: (Mode(v) if k == "mode" else int(v)) for k, v in data.items()}
    return replace(base or UniverseConfig(), **kwargs)


# ---------------------------------------------------------------------------
# Variable interpretations


class Env(Mapping[str, Value]):
    """An immutable variable interpretation."""

    __slots__ = ("_d", "_h")

    def __init__(self, items: Mapping[str, Value] | Iterable[tuple[str, Value]] = ()):
        self._d = dict(items)
        self._h: int | None = None

    def __getitem__(self, name: str) -> Value:
        return self._d[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._d)

    def __len__(self) -> int:
        return len(self._d)

    def __hash__(self) -> int:
        if self._h is None:
            self._h = hash(frozenset(self._d.items()))
        return self._h

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Env):
            return self._d == other._d
        return isinstance(other, Mapping) and self._d == dict(other)

    def extend(self, name: str, v: Value) -> "Env":
        d = dict(self._d)
        d[name] = v
        return Env(d)

    def restrict(self, names: frozenset[str]) -> "Env":
        if names.issuperset(self._d):
            return self
        return Env({k: v for k, v in self._d.items() if k in names})

    def map(self, fn: Callable[[Value], Value]) -> "Env":
        return Env({k: fn(v) for k, v in self._d.items()})

    def __repr__(self) -> str:
        from .value import show

        return "{" + ", ".join(f"{k} := {show(v)}" for k, v in self._d.items()) + "}"


VarInterp = Env


# ---------------------------------------------------------------------------
# The bounded universe


def _guard(count: int, cfg: UniverseConfig, what: str) -> None:
    if count > cfg.guard_ceiling:
        raise BoundsTooLarge(f"{what}: {count} exceeds guard ceiling {cfg.guard_ceiling}")


def _bounds(cfg: UniverseConfig) -> tuple[int, int, int, int]:
    return cfg.n_atoms, cfg.max_rank, cfg.max_set_size, cfg.guard_ceiling


def _subset_count(n: int, k: int) -> int:
    return sum(math.comb(n, j) for j in range(min(n, k) + 1))


@lru_cache(maxsize=None)
def _basic_pool(n_atoms: int, rank: int, size: int, guard: int) -> tuple[Value, ...]:
    """Atoms together with all bounded sets of rank at most `rank`."""
    atoms = tuple(Atom(k) for k in range(n_atoms))
    if rank <= 0:
        return atoms
    return atoms + _universe(n_atoms, rank, size, guard)


@lru_cache(maxsize=None)
def _universe(n_atoms: int, rank: int, size: int, guard: int) -> tuple[SetV, ...]:
    if rank <= 0:
        return ()
    pool = _basic_pool(n_atoms, rank - 1, size, guard)
    count = _subset_count(len(pool), size)
    if count > guard:
        raise BoundsTooLarge(f"universe sets: {count} exceeds guard ceiling {guard}")
    out = [SetV(c) for k in range(min(size, len(pool)) + 1) for c in itertools.combinations(pool, k)]
    return tuple(sorted(out))


@lru_cache(maxsize=None)
def _extended_pool(n_atoms: int, rank: int, size: int, guard: int) -> tuple[Value, ...]:
    basic = _basic_pool(n_atoms, rank, size, guard)
    _guard_raw(len(basic) ** 2, guard, "iso-pairs")
    isos = [IsoPair(a, b) for a in basic for b in basic]
    return tuple(sorted(set(basic) | set(isos) | set(_bijective(n_atoms, rank, size, guard))))


def _guard_raw(count: int, guard: int, what: str) -> None:
    if count > guard:
        raise BoundsTooLarge(f"{what}: {count} exceeds guard ceiling {guard}")


@lru_cache(maxsize=None)
def _bijective(n_atoms: int, rank: int, size: int, guard: int) -> tuple[SetV, ...]:
    if rank <= 0:
        return ()
    pool = _extended_pool(n_atoms, rank - 1, size, guard)
    faces = [(project(v, Side.LEFT), project(v, Side.RIGHT)) for v in pool]
    out: list[SetV] = []

    def extend(start: int, chosen: list[int], lefts: set, rights: set) -> None:
        out.append(SetV(pool[j] for j in chosen))
        _guard_raw(len(out), guard, "bijective sets")
        if len(chosen) == size:
            return
        for j in range(start, len(pool)):
            left, right = faces[j]
            if left in lefts or right in rights:
                continue
            chosen.append(j)
            lefts.add(left)
            rights.add(right)
            extend(j + 1, chosen, lefts, rights)
            chosen.pop()
            lefts.discard(left)
            rights.discard(right)

    extend(0, [], set(), set())
    return tuple(sorted(out))


def universe_sets(cfg: UniverseConfig) -> tuple[SetV, ...]:
    """All basic sets within the configured rank and size bounds, in canonical order."""
    return _universe(*_bounds(cfg))


def bij_sets(cfg: UniverseConfig) -> tuple[SetV, ...]:
    """All bijective sets within the bounds; elements may contain iso-pairs."""
    if not cfg.extended:
        raise ValueError("Bij is only available in extended mode")
    return _bijective(*_bounds(cfg))


# ---------------------------------------------------------------------------
# Denotations


class ClassDen:
    """A class of values: membership is decided structurally, members are enumerated within bounds."""

    def contains(self, v: Value) -> bool:
        raise NotImplementedError

    def members(self) -> tuple[Value, ...]:
        raise NotImplementedError


class SetClass(ClassDen):
    def __init__(self, cfg: UniverseConfig):
        self.cfg = cfg

    def contains(self, v: Value) -> bool:
        return isinstance(v, SetV) and v.basic

    def members(self) -> tuple[Value, ...]:
        return universe_sets(self.cfg)


class BijClass(ClassDen):
    def __init__(self, cfg: UniverseConfig):
        self.cfg = cfg

    def contains(self, v: Value) -> bool:
        return isinstance(v, SetV) and is_bijective(v)

    def members(self) -> tuple[Value, ...]:
        return _bijective(*_bounds(self.cfg))


class SigmaClass(ClassDen):
    def __init__(self, sem: "Semantics", e: Sigma, env: Env):
        self.sem, self.e, self.env = sem, e, env
        self._members: tuple[Value, ...] | None = None

    def contains(self, v: Value) -> bool:
        return self.sem.member_of(self.e, self.env, v)

    def members(self) -> tuple[Value, ...]:
        if self._members is None:
            sem, (x, dom, body) = self.sem, (self.e.var, self.e.domain, self.e.body)
            out = []
            for a in sem.members(sem.denote(dom, self.env)):
                for b in sem.members(sem.denote(body, self.env.extend(x, a))):
                    out.append(PairV(a, b))
                    _guard(len(out), sem.cfg, "class members")
            self._members = tuple(sorted(out))
        return self._members


class SubClass(ClassDen):
    def __init__(self, sem: "Semantics", e: Sub, env: Env):
        self.sem, self.e, self.env = sem, e, env
        self._members: tuple[Value, ...] | None = None

    def contains(self, v: Value) -> bool:
        return self.sem.member_of(self.e, self.env, v)

    def members(self) -> tuple[Value, ...]:
        if self._members is None:
            sem, (x, dom, phi) = self.sem, (self.e.var, self.e.domain, self.e.body)
            self._members = tuple(
                a for a in sem.members(sem.denote(dom, self.env)) if truth(sem.denote(phi, self.env.extend(x, a)))
            )
        return self._members


Denoted = Value | ClassDen


def truth(v: Any) -> bool:
    return isinstance(v, BoolV) and v.truth


@dataclass(frozen=True)
class ValueResult:
    value: Value


@dataclass(frozen=True)
class ClassResult:
    members: tuple[Value, ...]


class _Undefined:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Undefined"

    def __bool__(self) -> bool:
        return False


Undefined = _Undefined()
Denotation = ValueResult | ClassResult | _Undefined


# ---------------------------------------------------------------------------
# The engine

_INF = 1 << 30


class Semantics:
    """Judgments and values for one universe configuration.

    Each judgment is memoized.  While computing it we record the lowest
    fuel reached by any sub-judgment.  If that never hit zero the answer
    does not depend on the fuel (beyond the amount actually used), so it
    is stored once and reused at every larger fuel.
    """

    def __init__(self, cfg: UniverseConfig):
        self.cfg = cfg
        self.extended = cfg.extended
        self.set_class = SetClass(cfg)
        self.bij_class = BijClass(cfg)
        self._stable: dict[tuple, tuple[Any, int]] = {}
        self._exact: dict[tuple, Any] = {}
        self._frames: list[int] = []
        self._den: dict[tuple, Denoted] = {}
        self._synth: dict[tuple[Context, Expr], tuple[Expr, ...]] = {}
        self._iso: dict[tuple, Value | None] = {}
        self._twin: Semantics | None = None
        if sys.getrecursionlimit() < 20000:
            sys.setrecursionlimit(20000)

    # -- fuel bookkeeping ---------------------------------------------------

    def _reach(self, fuel: int) -> None:
        if self._frames and fuel < self._frames[-1]:
            self._frames[-1] = fuel

    def _judge(self, key: tuple, fuel: int, compute: Callable[[], Any], floor: Any) -> Any:
        if fuel <= 0:
            self._reach(0)
            return floor
        hit = self._stable.get(key)
        if hit is not None and fuel >= hit[1]:
            self._reach(fuel - hit[1] + 1)
            return hit[0]
        exact_key = key + (fuel,)
        if exact_key in self._exact:
            self._reach(0)
            return self._exact[exact_key]
        self._frames.append(fuel)
        try:
            result = compute()
        finally:
            low = self._frames.pop()
        self._reach(low)
        if low >= 1:
            need = fuel - low + 1
            prev = self._stable.get(key)
            if prev is None or need < prev[1]:
                self._stable[key] = (result, need)
        else:
            self._exact[exact_key] = result
        return result

    def verdict(self, compute: Callable[[], bool]) -> bool:
        """Run a top-level judgment; a negative answer that touched fuel zero is not definite."""
        self._frames.append(_INF)
        try:
            result = compute()
        finally:
            low = self._frames.pop()
        if not result and low <= 0:
            raise FuelExhausted(f"no verdict within max_fuel={self.cfg.max_fuel}")
        return result

    # -- judgments ----------------------------------------------------------

    def context(self, ctx: Context, i: int) -> tuple[Env, ...] | None:
        return self._judge(("ctx", ctx), i, lambda: self._context(ctx, i), None)

    def _context(self, ctx: Context, i: int) -> tuple[Env, ...] | None:
        if not ctx.entries:
            return (Env(),)
        init, last = ctx.split_last()
        if isinstance(last, Decl):
            if last.var in init.names or not self.is_type(init, last.type, i - 1):
                return None
            out = []
            for env in self.context(init, i - 1):
                for v in self.members(self.denote(last.type, env)):
                    out.append(env.extend(last.var, v))
                _guard(len(out), self.cfg, "context interpretations")
            return tuple(out)
        if not self.is_formula(init, last.formula, i - 1):
            return None
        return tuple(env for env in self.context(init, i - 1) if truth(self.denote(last.formula, env)))

    def defined(self, ctx: Context, e: Expr, i: int) -> bool:
        return self._judge(("def", ctx, e), i, lambda: self._defined(ctx, e, i), False)

    def _defined(self, ctx: Context, e: Expr, i: int) -> bool:
        envs = self.context(ctx, i)
        if envs is None:
            return False
        if not envs:
            return True
        return self.clause(ctx, e, i - 1) and self.context(ctx, i - 1) is not None

    def is_type(self, ctx: Context, e: Expr, i: int) -> bool:
        return self._judge(("type", ctx, e), i, lambda: self._kind(ctx, e, i, (SetV, ClassDen)), False)

    def is_class(self, ctx: Context, e: Expr, i: int) -> bool:
        return self._judge(("class", ctx, e), i, lambda: self._kind(ctx, e, i, ClassDen), False)

    def _kind(self, ctx: Context, e: Expr, i: int, kinds) -> bool:
        if not self.defined(ctx, e, i):
            return False
        return all(isinstance(self.denote(e, env), kinds) for env in self.context(ctx, i))

    def has_type(self, ctx: Context, u: Expr, ty: Expr, i: int) -> bool:
        return self._judge(("has", ctx, u, ty), i, lambda: self._has_type(ctx, u, ty, i), False)

    def _has_type(self, ctx: Context, u: Expr, ty: Expr, i: int) -> bool:
        if not is_set_level(u) or not self.defined(ctx, u, i) or not self.is_type(ctx, ty, i):
            return False
        return all(self.member_of(ty, env, self.denote(u, env)) for env in self.context(ctx, i))

    def is_set(self, ctx: Context, e: Expr, i: int) -> bool:
        return self.has_type(ctx, e, BIJ if self.extended else SET, i)

    def is_formula(self, ctx: Context, e: Expr, i: int) -> bool:
        return self.has_type(ctx, e, BOOL, i)

    def clause(self, ctx: Context, e: Expr, i: int) -> bool:
        """Side conditions for the value of `e` at fuel i+1, checked at fuel i."""
        return self._judge(("clause", ctx, e), i + 1, lambda: self._clause(ctx, e, i), False)

    def _clause(self, ctx: Context, e: Expr, i: int) -> bool:
        match e:
            case ConstSet() | ConstBool():
                return self.context(ctx, i) is not None
            case ConstBij():
                return self.extended and self.context(ctx, i) is not None
            case Var(x):
                return x in ctx.names and self.context(ctx, i) is not None
            case Sigma(x, dom, body):
                if not self.is_type(ctx, dom, i):
                    return False
                inner, _, body = ctx.bind(x, dom, body)
                return self.is_type(inner, body, i)
            case Sub(x, dom, body):
                if not self.is_type(ctx, dom, i):
                    return False
                inner, _, body = ctx.bind(x, dom, body)
                return self.is_formula(inner, body, i)
            case Pi(x, dom, body):
                if not self.is_set(ctx, dom, i):
                    return False
                inner, _, body = ctx.bind(x, dom, body)
                return self.is_set(inner, body, i)
            case Not(a):
                return self.is_formula(ctx, a, i)
            case Or(a, b) | And(a, b) | Implies(a, b) | Iff(a, b):
                return self.is_formula(ctx, a, i) and self.is_formula(ctx, b, i)
            case Forall(x, dom, body):
                inner, _, body = ctx.bind(x, dom, body)
                return self.is_formula(inner, body, i)
            case Pair(a, b):
                return (
                    is_set_level(a)
                    and is_set_level(b)
                    and self.defined(ctx, a, i)
                    and self.defined(ctx, b, i)
                )
            case Proj(_, u):
                if not self.defined(ctx, u, i):
                    return False
                return any(
                    self.has_type(ctx, u, s, i) for s in self.views(ctx, u) if isinstance(s, Sigma)
                )
            case App(f, a):
                if not (self.defined(ctx, f, i) and self.defined(ctx, a, i)):
                    return False
                return any(
                    self.has_type(ctx, f, p, i) and self.has_type(ctx, a, p.domain, i)
                    for p in self.views(ctx, f)
                    if isinstance(p, Pi)
                )
            case Eq(u, v):
                if not (self.defined(ctx, u, i) and self.defined(ctx, v, i)):
                    return False
                return any(
                    self.has_type(ctx, u, s, i) and self.has_type(ctx, v, s, i) and self.is_set(ctx, s, i)
                    for s in self.eq_candidates(ctx, u, v)
                )
            case Lambda(x, dom, body):
                if not (is_set_level(body) and self.is_set(ctx, dom, i)):
                    return False
                inner, _, body = ctx.bind(x, dom, body)
                return any(self.has_type(inner, body, t, i) for t in self.views(inner, body))
            case IsoEq(u, v, ty):
                if contains_bij(e):
                    return False
                return (
                    self.is_type(ctx, ty, i)
                    and self.has_type(ctx, u, ty, i)
                    and self.has_type(ctx, v, ty, i)
                )
        raise TypeError(f"not an expression: {e!r}")

    # -- candidate types ----------------------------------------------------

    def synth(self, ctx: Context, e: Expr) -> tuple[Expr, ...]:
        """Syntactic type candidates for `e`; each still has to be verified semantically."""
        key = (ctx, e)
        hit = self._synth.get(key)
        if hit is None:
            hit = tuple(dict.fromkeys(self._synth_raw(ctx, e)))
            self._synth[key] = hit
        return hit

    def _synth_raw(self, ctx: Context, e: Expr) -> Iterator[Expr]:
        match e:
            case Var(x):
                t = ctx.type_of(x)
                if t is not None:
                    yield t
            case Pair(a, b):
                for ta in self.views(ctx, a):
                    for tb in self.views(ctx, b):
                        z = fresh_name("_", free_vars(tb) | ctx.names)
                        yield Sigma(z, ta, tb)
            case Proj(1, u):
                for s in self.views(ctx, u):
                    if isinstance(s, Sigma):
                        yield s.domain
            case Proj(2, u):
                for s in self.views(ctx, u):
                    if isinstance(s, Sigma):
                        yield substitute(s.body, {s.var: Proj(1, u)})
            case App(f, a):
                for p in self.views(ctx, f):
                    if isinstance(p, Pi):
                        yield substitute(p.body, {p.var: a})
            case Lambda(x, dom, body):
                inner, x2, body2 = ctx.bind(x, dom, body)
                for t in self.views(inner, body2):
                    yield Pi(x2, dom, t)
            case Eq() | IsoEq() | Forall() | Not() | Or() | And() | Implies() | Iff():
                yield BOOL

    def views(self, ctx: Context, e: Expr) -> tuple[Expr, ...]:
        """Candidates for `e`, closed under forgetting a subtype predicate."""
        out = []
        for t in self.synth(ctx, e):
            while True:
                out.append(t)
                if not isinstance(t, Sub):
                    break
                t = t.domain
        return tuple(dict.fromkeys(out))

    def eq_candidates(self, ctx: Context, u: Expr, v: Expr) -> tuple[Expr, ...]:
        declared = []
        for entry in ctx.entries:
            if isinstance(entry, Decl) and is_set_level(entry.type):
                t = entry.type
                while True:
                    declared.append(t)
                    if not isinstance(t, Sub):
                        break
                    t = t.domain
        found = [t for t in self.views(ctx, u) + self.views(ctx, v) + tuple(declared) if is_set_level(t)]
        return tuple(dict.fromkeys(found))

    # -- values -------------------------------------------------------------

    def members(self, d: Denoted) -> tuple[Value, ...]:
        if isinstance(d, SetV):
            return d.elements
        if isinstance(d, ClassDen):
            return d.members()
        raise EvalError(f"{d!r} is not a set or class")

    def member_of(self, ty: Expr, env: Env, v: Value) -> bool:
        """Decide v ∈ value of `ty` at env without enumerating function spaces."""
        match ty:
            case ConstSet():
                return isinstance(v, SetV) and v.basic
            case ConstBij():
                return isinstance(v, SetV) and is_bijective(v)
            case ConstBool():
                return isinstance(v, BoolV)
            case Pi(x, dom, body):
                if not isinstance(v, FunV):
                    return False
                d = self.denote(dom, env)
                if not isinstance(d, SetV) or len(v.graph) != len(d) or any(k not in v.graph for k in d.elements):
                    return False
                return all(self.member_of(body, env.extend(x, k), v.graph[k]) for k in d.elements)
            case Sigma(x, dom, body):
                return (
                    isinstance(v, PairV)
                    and self.member_of(dom, env, v.fst)
                    and self.member_of(body, env.extend(x, v.fst), v.snd)
                )
            case Sub(x, dom, body):
                return self.member_of(dom, env, v) and truth(self.denote(body, env.extend(x, v)))
        d = self.denote(ty, env)
        if isinstance(d, SetV):
            return v in d
        if isinstance(d, ClassDen):
            return d.contains(v)
        return False

    def denote(self, e: Expr, env: Env) -> Denoted:
        if isinstance(e, Var):
            try:
                return env[e.name]
            except KeyError:
                raise EvalError(f"unbound variable {e.name}") from None
        names = e.__dict__.get("_fvt")
        if names is None:
            names = tuple(sorted(free_vars(e)))
            object.__setattr__(e, "_fvt", names)
        d = env._d
        key = (e, *[d.get(n) for n in names])
        hit = self._den.get(key)
        if hit is None:
            hit = self._denote(e, env.restrict(frozenset(names)))
            self._den[key] = hit
        return hit

    def _denote(self, e: Expr, env: Env) -> Denoted:
        d = self.denote
        match e:
            case ConstSet():
                return self.set_class
            case ConstBij():
                if not self.extended:
                    raise EvalError("Bij is not part of the base language")
                return self.bij_class
            case ConstBool():
                return BOOL_SET
            case Pair(a, b):
                return PairV(self._value(a, env), self._value(b, env))
            case Proj(k, u):
                p = d(u, env)
                if not isinstance(p, PairV):
                    raise EvalError(f"projection of non-pair {p!r}")
                return p.fst if k == 1 else p.snd
            case Lambda(x, dom, body):
                s = self._set(dom, env)
                return FunV((a, self._value(body, env.extend(x, a))) for a in s.elements)
            case App(f, a):
                fv, av = d(f, env), d(a, env)
                if not isinstance(fv, FunV) or av not in fv.graph:
                    raise EvalError(f"cannot apply {fv!r} to {av!r}")
                return fv.graph[av]
            case Eq(u, v):
                return bool_value(d(u, env) == d(v, env))
            case IsoEq(u, v, ty):
                return bool_value(self.iso_witness(ty, env, d(u, env), d(v, env)) is not None)
            case Forall(x, dom, body):
                return bool_value(all(truth(d(body, env.extend(x, a))) for a in self.members(d(dom, env))))
            case Not(a):
                return bool_value(not truth(d(a, env)))
            case Or(a, b):
                return bool_value(truth(d(a, env)) or truth(d(b, env)))
            case And(a, b):
                return bool_value(truth(d(a, env)) and truth(d(b, env)))
            case Implies(a, b):
                return bool_value(not truth(d(a, env)) or truth(d(b, env)))
            case Iff(a, b):
                return bool_value(truth(d(a, env)) == truth(d(b, env)))
            case Pi(x, dom, body):
                s = self._set(dom, env)
                ranges = [self._set(body, env.extend(x, a)).elements for a in s.elements]
                _guard(math.prod(len(r) for r in ranges), self.cfg, "function space")
                return SetV(FunV(zip(s.elements, combo)) for combo in itertools.product(*ranges))
            case Sigma(x, dom, body):
                if not is_set_level(e):
                    return SigmaClass(self, e, env)
                s = self._set(dom, env)
                out = [PairV(a, b) for a in s.elements for b in self._set(body, env.extend(x, a)).elements]
                _guard(len(out), self.cfg, "dependent pairs")
                return SetV(out)
            case Sub(x, dom, body):
                if not is_set_level(e):
                    return SubClass(self, e, env)
                s = self._set(dom, env)
                return SetV(a for a in s.elements if truth(d(body, env.extend(x, a))))
        raise TypeError(f"not an expression: {e!r}")

    def _value(self, e: Expr, env: Env) -> Value:
        v = self.denote(e, env)
        if not isinstance(v, Value):
            raise EvalError(f"{e} denotes a class, not a value")
        return v

    def _set(self, e: Expr, env: Env) -> SetV:
        v = self.denote(e, env)
        if not isinstance(v, SetV):
            raise EvalError(f"{e} does not denote a set")
        return v

    # -- isomorphism --------------------------------------------------------

    def extended_twin(self) -> "Semantics":
        if self.extended:
            return self
        if self._twin is None:
            self._twin = engine(self.cfg.with_mode(Mode.EXTENDED))
        return self._twin

    def iso_witness(self, ty: Expr, env: Env, a: Value, b: Value) -> Value | None:
        """The first value of the starred type whose left face is `a` and right face is `b`."""
        env = env.restrict(free_vars(ty))
        key = (ty, env, a, b)
        if key not in self._iso:
            self._iso[key] = next(self.extended_twin().witnesses(ty, env, a, b), None)
        return self._iso[key]

    def witnesses(self, ty: Expr, env: Env, a: Value, b: Value) -> Iterator[Value]:
        """Values of star(ty) at env with faces a and b, built from the faces themselves.

        A carrier witness pairs each element with its image, using the bare
        element where both sides agree, so the search never depends on
        which bijective sets fall inside the bounded universe.
        """
        match ty:
            case ConstSet():
                if isinstance(a, SetV) and isinstance(b, SetV) and len(a) == len(b):
                    for image in itertools.permutations(b.elements):
                        yield SetV(x if x == y else IsoPair(x, y) for x, y in zip(a.elements, image))
                return
            case Sigma(x, dom, body) if not is_set_level(ty):
                if isinstance(a, PairV) and isinstance(b, PairV):
                    for first in self.witnesses(dom, env, a.fst, b.fst):
                        for second in self.witnesses(body, env.extend(x, first), a.snd, b.snd):
                            yield PairV(first, second)
                return
            case Sub(x, dom, phi) if not is_set_level(ty):
                pred = star(phi)
                for w in self.witnesses(dom, env, a, b):
                    if truth(self.denote(pred, env.extend(x, w))):
                        yield w
                return
        for w in self.members(self.denote(star(ty), env)):
            if project(w, Side.LEFT) == a and project(w, Side.RIGHT) == b:
                yield w

    # -- interpretations ----------------------------------------------------

    def in_context(self, ctx: Context, env: Mapping[str, Value], i: int) -> bool:
        """Is `env` one of the interpretations of `ctx` at fuel i?  Decided structurally."""
        if self.context(ctx, i) is None or set(env) != set(ctx.names):
            return False
        prefix = Env()
        for entry in ctx.entries:
            if isinstance(entry, Decl):
                v = env[entry.var]
                if not self.member_of(entry.type, prefix, v):
                    return False
                prefix = prefix.extend(entry.var, v)
            elif not truth(self.denote(entry.formula, prefix)):
                return False
        return True


def star(e: Expr) -> Expr:
    """Replace every occurrence of Set by Bij."""
    if isinstance(e, ConstSet):
        return BIJ
    kids = children(e)
    if not kids:
        return e
    return rebuild(e, (star(c) for c in kids))


@lru_cache(maxsize=None)
def engine(cfg: UniverseConfig) -> Semantics:
    """The shared engine for a configuration."""
    return Semantics(cfg)


# ---------------------------------------------------------------------------
# Public entry points


def evaluate(ctx: Context, e: Expr, gamma: Mapping[str, Value], fuel: int, cfg: UniverseConfig) -> Denotation:
    """The value of `e` at interpretation `gamma` and the given fuel, or Undefined."""
    sem = engine(cfg)
    if fuel <= 0:
        return Undefined
    if not sem.clause(ctx, e, fuel - 1) or not sem.in_context(ctx, gamma, fuel - 1):
        return Undefined
    d = sem.denote(e, Env(gamma))
    if isinstance(d, ClassDen):
        return ClassResult(sem.members(d))
    return ValueResult(d)


def context_denotation(ctx: Context, fuel: int, cfg: UniverseConfig) -> tuple[Env, ...] | _Undefined:
    envs = engine(cfg).context(ctx, fuel)
    return Undefined if envs is None else envs


def well_formed(ctx: Context, e: Expr, cfg: UniverseConfig) -> bool:
    sem = engine(cfg)
    return sem.verdict(lambda: sem.defined(ctx, e, cfg.max_fuel))


def models_type(ctx: Context, e: Expr, ty: Expr, cfg: UniverseConfig) -> bool:
    sem = engine(cfg)
    return sem.verdict(lambda: sem.has_type(ctx, e, ty, cfg.max_fuel))


def models_formula(ctx: Context, phi: Expr, cfg: UniverseConfig) -> bool:
    sem = engine(cfg)
    fuel = cfg.max_fuel

    def check() -> bool:
        if not sem.is_formula(ctx, phi, fuel):
            return False
        return all(truth(sem.denote(phi, env)) for env in sem.context(ctx, fuel))

    return sem.verdict(check)


def is_type(ctx: Context, e: Expr, cfg: UniverseConfig) -> bool:
    sem = engine(cfg)
    return sem.verdict(lambda: sem.is_type(ctx, e, cfg.max_fuel))


def is_class(ctx: Context, e: Expr, cfg: UniverseConfig) -> bool:
    sem = engine(cfg)
    return sem.verdict(lambda: sem.is_class(ctx, e, cfg.max_fuel))


def interpretations(ctx: Context, cfg: UniverseConfig) -> tuple[Env, ...]:
    """The context's interpretations at max_fuel; raises if the context is ill-formed."""
    sem = engine(cfg)
    envs = sem.context(ctx, cfg.max_fuel)
    if envs is None:
        raise ValueError("context is ill-formed")
    return envs


def value_of(e: Expr, env: Mapping[str, Value], cfg: UniverseConfig) -> Denoted:
    """Compositional value of an expression already known to be well-formed."""
    return engine(cfg).denote(e, env if isinstance(env, Env) else Env(env))
