"""Exhaustive self-test suites for the metatheory of the semantics.

Each suite enumerates every case at a small configuration and checks one
lemma or rule on each.  They stop at the first counterexample, so a
passing run is a tally of checked cases.

The expression sweep builds every expression of bounded depth that is
defined in at least one of the engines being compared.  A constructor
whose child is undefined in every engine is itself undefined there, so
skipping it loses nothing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Iterator

from . import corpus
from .iso import (
    PreconditionFailed,
    congruence_all_pairs,
    cryptomorphize,
    semantic_iso,
    structure_iso_values,
    structure_type,
)
from .semantics import (
    FuelExhausted,
    ClassDen,
    Env,
    Mode,
    Semantics,
    UniverseConfig,
    engine,
    star,
)
from .syntax import (
    BIJ,
    BOOL,
    SET,
    And,
    App,
    Context,
    Decl,
    Eq,
    Expr,
    Forall,
    Iff,
    Implies,
    Lambda,
    Not,
    Or,
    Pair,
    Pi,
    Proj,
    Sigma,
    Sub,
    Var,
    fresh_name,
    is_set_level,
    parse,
    parse_context,
    render,
    render_context,
)
from .value import (
    Atom,
    FALSE,
    TRUE,
    Side,
    Value,
    enumerate_values,
    is_bijective,
    pack as pack_value,
    project,
    show,
    unpack,
)

BASE_CONTEXTS = (
    "",
    "s : Set",
    "b : Bool",
    "P : Sigma (w : Set) w",
    "s : Set\nx : s",
    "s : Set\nt : Set",
    "b : Bool\nassume b",
)

BIJ_CONTEXTS = (
    "s : Bij",
    "s : Bij\nx : s",
)

DEFAULT_DEPTH = 3


def default_depth(cfg: UniverseConfig) -> int:
    """Sweep depth for a universe; binder contexts explode past rank 1."""
    return DEFAULT_DEPTH if cfg.max_rank <= 1 else 2

# Binder bodies are swept only under contexts with at most this many
# interpretations.  Nothing reaches it at rank 1; larger universes skip
# the offending binders and report how many in the tally.
BINDER_BUDGET = 50_000


# ---------------------------------------------------------------------------
# Results


class Counterexample(Exception):
    pass


@dataclass
class SuiteResult:
    name: str
    cases: dict[str, int] = field(default_factory=dict)
    counterexample: str | None = None
    depth: int | None = None

    @property
    def passed(self) -> bool:
        return self.counterexample is None

    @property
    def total(self) -> int:
        return sum(self.cases.values())

    def count(self, case: str, n: int = 1) -> None:
        self.cases[case] = self.cases.get(case, 0) + n

    def to_json(self) -> dict:
        return {
            "suite": self.name,
            "passed": self.passed,
            "cases": dict(sorted(self.cases.items())),
            "total": self.total,
            "counterexample": self.counterexample,
            "depth": self.depth,
        }


def _where(ctx: Context, e: Expr | None = None, env: Env | None = None) -> str:
    parts = [f"context [{render_context(ctx)}]"]
    if e is not None:
        parts.append(f"expression {render(e)}")
    if env is not None:
        parts.append("at " + ", ".join(f"{k} = {show(v)}" for k, v in sorted(env.items())) if env else "at the empty interpretation")
    return "; ".join(parts)


def _check(ok: bool, message: Callable[[], str]) -> None:
    if not ok:
        raise Counterexample(message())


def _run(name: str, body: Callable[[SuiteResult], None]) -> SuiteResult:
    result = SuiteResult(name)
    try:
        body(result)
    except Counterexample as exc:
        result.counterexample = str(exc)
    return result


# ---------------------------------------------------------------------------
# The expression sweep


class Sweep:
    """Defined expressions of bounded depth under a context, for a set of engines."""

    def __init__(self, engines: Iterable[Semantics], with_bij: bool):
        self.engines = tuple(engines)
        self.with_bij = with_bij
        self.fuel = self.engines[0].cfg.max_fuel
        self._memo: dict[tuple[Context, int], tuple[Expr, ...]] = {}
        self.skipped: set[tuple[Context, Expr]] = set()

    def _any(self, judgment: str, ctx: Context, e: Expr) -> bool:
        return any(getattr(sem, judgment)(ctx, e, self.fuel) for sem in self.engines)

    def leaves(self, ctx: Context) -> list[Expr]:
        out: list[Expr] = [Var(x) for x in ctx.names]
        out += [SET, BOOL] + ([BIJ] if self.with_bij else [])
        return [e for e in out if self._any("defined", ctx, e)]

    def expressions(self, ctx: Context, depth: int) -> tuple[Expr, ...]:
        key = (ctx, depth)
        hit = self._memo.get(key)
        if hit is None:
            hit = tuple(self._build(ctx, depth))
            self._memo[key] = hit
        return hit

    def _build(self, ctx: Context, depth: int) -> list[Expr]:
        if depth <= 0 or not self._ctx_ok(ctx):
            return []
        if depth == 1:
            return self.leaves(ctx)
        smaller = self.expressions(ctx, depth - 1)
        set_level = [e for e in smaller if is_set_level(e)]
        formulas = [e for e in set_level if self._any("is_formula", ctx, e)]
        types = [e for e in smaller if self._any("is_type", ctx, e)]
        sets = [e for e in set_level if self._any("is_set", ctx, e)]
        found: dict[Expr, None] = dict.fromkeys(smaller)

        def offer(e: Expr) -> None:
            if e not in found and self._any("defined", ctx, e):
                found[e] = None

        for u in set_level:
            offer(Proj(1, u))
            offer(Proj(2, u))
        for a, b in itertools.product(set_level, repeat=2):
            offer(Pair(a, b))
            offer(App(a, b))
            offer(Eq(a, b))
        for a in formulas:
            offer(Not(a))
        for a, b in itertools.product(formulas, repeat=2):
            for op in (Or, And, Implies, Iff):
                offer(op(a, b))
        var = fresh_name("y", ctx.names)
        for dom in types:
            if self._binder_size(ctx, dom) > BINDER_BUDGET:
                self.skipped.add((ctx, dom))
                continue
            inner = ctx.declare(var, dom)
            if not self._ctx_ok(inner):
                continue
            for body in self.expressions(inner, depth - 1):
                offer(Sigma(var, dom, body))
                offer(Sub(var, dom, body))
                offer(Forall(var, dom, body))
                if dom in sets:
                    offer(Pi(var, dom, body))
                    offer(Lambda(var, dom, body))
        return list(found)

    def _binder_size(self, ctx: Context, dom: Expr) -> int:
        size = 0
        for sem in self.engines:
            envs = sem.context(ctx, self.fuel)
            if envs is not None and sem.is_type(ctx, dom, self.fuel):
                size = max(size, sum(len(sem.members(sem.denote(dom, env))) for env in envs))
        return size

    def _ctx_ok(self, ctx: Context) -> bool:
        return any(sem.context(ctx, self.fuel) is not None for sem in self.engines)


def sweep_cases(sweep: Sweep, contexts: Iterable[str], depth: int) -> Iterator[tuple[Context, Expr]]:
    for text in contexts:
        ctx = parse_context(text)
        for e in sweep.expressions(ctx, depth):
            yield ctx, e


def _contexts(with_bij: bool) -> tuple[str, ...]:
    return BASE_CONTEXTS + (BIJ_CONTEXTS if with_bij else ())


def _sweep_cfg(cfg: UniverseConfig, mode: Mode) -> UniverseConfig:
    return cfg.with_mode(mode)


_SWEEPS: dict[tuple, Sweep] = {}


def base_sweep(cfg: UniverseConfig) -> Sweep:
    """Base-language expressions defined in Base or Extended mode."""
    key = ("base", cfg.with_mode(Mode.BASE))
    if key not in _SWEEPS:
        _SWEEPS[key] = Sweep((engine(cfg.with_mode(Mode.BASE)), engine(cfg.with_mode(Mode.EXTENDED))), False)
    return _SWEEPS[key]


def extended_sweep(cfg: UniverseConfig) -> Sweep:
    """Extended-language expressions, Bij included, defined in Extended mode."""
    key = ("ext", cfg.with_mode(Mode.BASE))
    if key not in _SWEEPS:
        _SWEEPS[key] = Sweep((engine(cfg.with_mode(Mode.EXTENDED)),), True)
    return _SWEEPS[key]


# ---------------------------------------------------------------------------
# Helpers shared by the suites


def _decide(sem: Semantics, compute: Callable[[], bool], where: Callable[[], str]) -> bool:
    try:
        return sem.verdict(compute)
    except FuelExhausted:
        raise Counterexample(f"no verdict within fuel {sem.cfg.max_fuel}: {where()}") from None


def _observe(sem: Semantics, e: Expr, env: Env):
    d = sem.denote(e, env)
    if isinstance(d, ClassDen):
        return ("class", sem.members(d))
    return d


def _engines(cfg: UniverseConfig) -> tuple[Semantics, Semantics]:
    return engine(cfg.with_mode(Mode.BASE)), engine(cfg.with_mode(Mode.EXTENDED))


def _envs(sem: Semantics, ctx: Context) -> tuple[Env, ...]:
    envs = sem.context(ctx, sem.cfg.max_fuel)
    return () if envs is None else envs


SIDES = (Side.LEFT, Side.RIGHT)


def _report_skipped(r: SuiteResult, sweep: Sweep) -> None:
    if sweep.skipped:
        r.count("binders-over-budget", len(sweep.skipped))


# ---------------------------------------------------------------------------
# Suites


def conservative_extension(cfg: UniverseConfig, depth: int = DEFAULT_DEPTH) -> SuiteResult:
    """Base-language expressions mean the same thing in both modes."""
    base, ext = _engines(cfg)
    sweep = base_sweep(cfg)
    fuel = cfg.max_fuel

    def body(r: SuiteResult) -> None:
        for text in BASE_CONTEXTS:
            ctx = parse_context(text)
            _check(base.context(ctx, fuel) == ext.context(ctx, fuel), lambda: "interpretations differ: " + _where(ctx))
            r.count("context")
            envs = _envs(base, ctx)
            for e in sweep.expressions(ctx, depth):
                where = lambda: _where(ctx, e)
                in_base = _decide(base, lambda: base.defined(ctx, e, fuel), where)
                in_ext = _decide(ext, lambda: ext.defined(ctx, e, fuel), where)
                _check(in_base == in_ext, lambda: f"defined in {'Base' if in_base else 'Extended'} only: {where()}")
                r.count("definedness")
                if not in_base:
                    continue
                for env in envs:
                    _check(
                        _observe(base, e, env) == _observe(ext, e, env),
                        lambda: "values differ: " + _where(ctx, e, env),
                    )
                    r.count("value")
        _report_skipped(r, sweep)

    return _run("conservative", body)


def bijectivity_lemma(cfg: UniverseConfig, depth: int = DEFAULT_DEPTH) -> SuiteResult:
    """Every value the extended language can define is bijective."""
    _, ext = _engines(cfg)
    sweep = extended_sweep(cfg)
    fuel = cfg.max_fuel

    def body(r: SuiteResult) -> None:
        verified: set[Value] = set()
        for text in _contexts(True):
            ctx = parse_context(text)
            envs = _envs(ext, ctx)
            for env in envs:
                _check(all(is_bijective(v) for v in env.values()), lambda: "non-bijective interpretation: " + _where(ctx, None, env))
                r.count("interpretation")
            for e in sweep.expressions(ctx, depth):
                if not _decide(ext, lambda: ext.defined(ctx, e, fuel), lambda: _where(ctx, e)):
                    continue
                for env in envs:
                    d = ext.denote(e, env)
                    if isinstance(d, ClassDen):
                        ms = ext.members(d)
                        r.count("member", len(ms))
                        # Bijectivity is a property of the value alone, so each distinct member is checked once.
                        for m in sorted(set(ms).difference(verified)):
                            _check(is_bijective(m), lambda: f"class member {show(m)} is not bijective: " + _where(ctx, e, env))
                            verified.add(m)
                    else:
                        _check(is_bijective(d), lambda: f"value {show(d)} is not bijective: " + _where(ctx, e, env))
                        r.count("value")
        _report_skipped(r, sweep)

    return _run("bijectivity", body)


def commutation_lemma(cfg: UniverseConfig, depth: int = DEFAULT_DEPTH) -> SuiteResult:
    """Left and right projections commute with the value function."""
    _, ext = _engines(cfg)
    sweep = extended_sweep(cfg)
    fuel = cfg.max_fuel

    def body(r: SuiteResult) -> None:
        faces_of: dict[Side, dict[Value, Value]] = {side: {} for side in SIDES}
        for text in _contexts(True):
            ctx = parse_context(text)
            envs = _envs(ext, ctx)
            checked: dict[tuple[Expr, Env], set[Value]] = {}
            faces = {}
            for env in envs:
                for side in SIDES:
                    face = env.map(lambda v: project(v, side))
                    _check(ext.in_context(ctx, face, fuel), lambda: f"(a) {side.value}-face leaves the context: " + _where(ctx, None, env))
                    r.count(f"a-{side.value}")
                    faces[env, side] = face
            for e in sweep.expressions(ctx, depth):
                if not _decide(ext, lambda: ext.defined(ctx, e, fuel), lambda: _where(ctx, e)):
                    continue
                typed = ext.is_type(ctx, e, fuel)
                for env in envs:
                    d = ext.denote(e, env)
                    for side in SIDES:
                        face = faces[env, side]
                        if is_set_level(e):
                            _check(
                                project(d, side) == ext.denote(e, face),
                                lambda: f"(c) {side.value} does not commute: " + _where(ctx, e, env),
                            )
                            r.count(f"c-{side.value}")
                        if typed:
                            ms = ext.members(d)
                            r.count(f"b-{side.value}", len(ms))
                            # Faces repeat heavily inside classes; each distinct face is checked once per type and interpretation.
                            cache = faces_of[side]
                            seen = checked.setdefault((e, face), set())
                            for f in sorted({cache[m] if m in cache else cache.setdefault(m, project(m, side)) for m in ms} - seen):
                                _check(
                                    ext.member_of(e, face, f),
                                    lambda: f"(b) the {side.value}-face {show(f)} leaves the type: " + _where(ctx, e, env),
                                )
                                seen.add(f)
        _report_skipped(r, sweep)

    return _run("commutation", body)


# Exhaustive pools for unpack . pack: one atom up to rank 3, and two atoms
# with both booleans up to rank 2.
PACK_POOLS = (
    ((Atom(0),), 3, 1),
    ((Atom(0), Atom(1), FALSE, TRUE), 2, 1),
)


# Part (c) compares memberships for every member of every starred type,
# which grows with the product of nested class sizes; it runs one level shallower.
PACK_MEMBERSHIP_DEPTH = 2


def pack_lemma(cfg: UniverseConfig, depth: int = DEFAULT_DEPTH) -> SuiteResult:
    """unpack . pack is the identity, and packing commutes with the value function."""
    _, ext = _engines(cfg)
    sweep = extended_sweep(cfg)
    fuel = cfg.max_fuel

    def body(r: SuiteResult) -> None:
        for leaves, max_rank, size in PACK_POOLS:
            for v in enumerate_values(leaves, max_rank, size, ceiling=cfg.guard_ceiling):
                _check(unpack(pack_value(v)) == v, lambda: f"unpack(pack({show(v)})) differs")
                r.count("unpack-pack")
                if is_bijective(v):
                    _check(is_bijective(pack_value(v)), lambda: f"pack({show(v)}) is not bijective")
                    r.count("pack-bijective")
        for text in _contexts(True):
            ctx = parse_context(text)
            envs = _envs(ext, ctx)
            packed = {}
            for env in envs:
                packed[env] = env.map(pack_value)
                _check(ext.in_context(ctx, packed[env], fuel), lambda: "(a) packed interpretation leaves the context: " + _where(ctx, None, env))
                r.count("a")
            shallow = set(sweep.expressions(ctx, min(depth, PACK_MEMBERSHIP_DEPTH)))
            for e in sweep.expressions(ctx, depth):
                if not _decide(ext, lambda: ext.defined(ctx, e, fuel), lambda: _where(ctx, e)):
                    continue
                typed = e in shallow and ext.is_type(ctx, e, fuel)
                starred = star(e)
                if typed:
                    _check(
                        _decide(ext, lambda: ext.is_type(ctx, starred, fuel), lambda: _where(ctx, starred)),
                        lambda: "(c) starred type is undefined: " + _where(ctx, e),
                    )
                for env in envs:
                    if is_set_level(e):
                        _check(
                            pack_value(ext.denote(e, env)) == ext.denote(e, packed[env]),
                            lambda: "(b) packing does not commute: " + _where(ctx, e, env),
                        )
                        r.count("b")
                    if typed:
                        pool = dict.fromkeys(ext.members(ext.denote(starred, env)))
                        pool.update(dict.fromkeys(ext.members(ext.denote(e, env))))
                        for m in pool:
                            if not is_bijective(m):
                                continue
                            lhs = ext.member_of(e, packed[env], pack_value(m))
                            rhs = ext.member_of(starred, env, m)
                            _check(lhs == rhs, lambda: f"(c) membership of {show(m)} disagrees: " + _where(ctx, e, env))
                            r.count("c")
        _report_skipped(r, sweep)

    return _run("pack", body)



def functor_lemma(cfg: UniverseConfig, judgments: Iterable[corpus.Judgment] = corpus.FUNCTOR_CORPUS) -> SuiteResult:
    """Base typings x : sigma |= e : tau lift to x : sigma* |= e : tau* in the extended language."""
    base, ext = _engines(cfg)
    fuel = cfg.max_fuel

    def body(r: SuiteResult) -> None:
        for j in judgments:
            inner, x, e = j.ctx.bind(j.var, j.sigma, j.expr)
            where = lambda: f"judgment {j.name}"
            _check(
                _decide(base, lambda: base.has_type(inner, e, j.tau, fuel), where),
                lambda: f"the base typing fails for {where()}",
            )
            starred = j.ctx.declare(x, star(j.sigma))
            tau = star(j.tau)
            _check(
                _decide(ext, lambda: ext.defined(starred, e, fuel), where),
                lambda: f"undefined over the starred class in {where()}",
            )
            for env in _envs(ext, starred):
                _check(
                    ext.member_of(tau, env, ext.denote(e, env)),
                    lambda: f"value leaves {render(tau)} in {where()}: " + _where(starred, e, env),
                )
                r.count("instance")
            r.count("judgment")

    return _run("functor", body)


# Structure types whose structure rule is compared with semantic isomorphism.
STRUCTURE_CORPUS = (
    corpus.MAGMA,
    corpus.POINTED_SET,
    "Sigma (s : Set) (s -> s)",
    "Sigma (s : Set) (s -> Bool)",
    "Sigma (s : Set) Sigma (t : Set) (s -> t)",
)


def structure_rule(cfg: UniverseConfig, types: Iterable[str] = STRUCTURE_CORPUS) -> SuiteResult:
    """The structure rule decides isomorphism exactly when semantic isomorphism holds."""
    base, _ = _engines(cfg)

    def body(r: SuiteResult) -> None:
        for text in types:
            sigma = parse(text)
            st = structure_type(sigma)
            members = base.members(base.denote(sigma, Env()))
            for a in members:
                for b in members:
                    by_rule, _ = structure_iso_values(st, a, b, cfg)
                    semantic = base.iso_witness(sigma, Env(), a, b) is not None
                    _check(
                        by_rule == semantic,
                        lambda: f"{text}: structure rule says {by_rule}, semantic isomorphism says {semantic} for {show(a)} and {show(b)}",
                    )
                    r.count("pair")
                    if semantic:
                        r.count("isomorphic")

    return _run("structure", body)


def congruence_theorem(cfg: UniverseConfig, judgments: Iterable[corpus.Judgment] = corpus.FUNCTOR_CORPUS) -> SuiteResult:
    """Isomorphic inputs give isomorphic outputs for every judgment of the functor corpus."""

    def body(r: SuiteResult) -> None:
        for j in judgments:
            try:
                res = congruence_all_pairs(j.ctx, j.var, j.sigma, j.expr, j.tau, cfg)
            except PreconditionFailed as exc:
                raise Counterexample(f"judgment {j.name}: {exc}") from None
            _check(
                res.passed,
                lambda: f"judgment {j.name}: outputs are not isomorphic at "
                + ", ".join(f"{k} = {show(v)}" for k, v in sorted(res.counterexample.items())),
            )
            r.count("isomorphic-pair", res.checked)
            r.count("judgment")

    return _run("congruence", body)


# Classes whose cryptomorphisms are checked.  The group action is run with a
# single atom so the only group is trivial.
CRYPTO_CORPUS = (
    ("Set", None),
    ("Sigma (s : Set) Sub (P : Bool) P", None),
    (corpus.GROUP_ACTION, 1),
    (corpus.UNARY_WITH_MAP, None),
    (corpus.MAGMA, None),
)


def crypto_check(sigma: Expr, cfg: UniverseConfig, r: SuiteResult, ctx: Context = Context()) -> None:
    base, _ = _engines(cfg)
    c = cryptomorphize(ctx, sigma, cfg)
    target = c.target.expr
    members = base.members(base.denote(sigma, Env()))
    images = {}
    for u in members:
        w = c.forward(u)
        _check(base.member_of(target, Env(), w), lambda: f"forward({show(u)}) = {show(w)} is not in the target")
        _check(c.backward(w) == u, lambda: f"backward(forward({show(u)})) differs from {show(u)}")
        images[u] = w
        r.count("forward")
    for w in base.members(base.denote(target, Env())):
        u = c.backward(w)
        _check(base.member_of(sigma, Env(), u), lambda: f"backward({show(w)}) = {show(u)} is not in the source")
        _check(c.forward(u) == w, lambda: f"forward(backward({show(w)})) differs from {show(w)}")
        r.count("backward")
    for u in members:
        for v in members:
            same = (base.iso_witness(sigma, Env(), u, v) is None) == (base.iso_witness(target, Env(), images[u], images[v]) is None)
            _check(same, lambda: f"isomorphism of {show(u)} and {show(v)} is not preserved")
            r.count("iso-verdict")


def cryptomorphism(cfg: UniverseConfig, classes=CRYPTO_CORPUS) -> SuiteResult:
    """Cryptomorphisms round-trip on the bounded denotation and preserve isomorphism."""

    def body(r: SuiteResult) -> None:
        for text, atoms in classes:
            local = cfg if atoms is None else replace(cfg, n_atoms=atoms)
            crypto_check(parse(text), local, r)

    return _run("cryptomorphism", body)


SUITES: dict[str, Callable[[UniverseConfig], SuiteResult]] = {
    "conservative": conservative_extension,
    "bijectivity": bijectivity_lemma,
    "commutation": commutation_lemma,
    "pack": pack_lemma,
    "functor": functor_lemma,
    "structure": structure_rule,
    "congruence": congruence_theorem,
    "cryptomorphism": cryptomorphism,
}


SWEEP_SUITES = ("conservative", "bijectivity", "commutation", "pack")


def run_all(cfg: UniverseConfig, names: Iterable[str] | None = None, depth: int | None = None) -> list[SuiteResult]:
    """Run suites in the fixed order, stopping after the first one that fails."""
    depth = depth or default_depth(cfg)
    out = []
    for name in names or SUITES:
        if name in SWEEP_SUITES:
            res = SUITES[name](cfg, depth)
            res.depth = depth
        else:
            res = SUITES[name](cfg)
        out.append(res)
        if not res.passed:
            break
    return out
