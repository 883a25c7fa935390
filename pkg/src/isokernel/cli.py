"""Command-line front end.

Exit codes: 0 for a positive verdict, 1 for a negative one (ill-formed,
false, no witness, failed suite), 2 for usage and resource errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import Any, Sequence

from . import lemmas
from .iso import (
    NotAClass,
    NotAStructureType,
    PreconditionFailed,
    UnknownCarrier,
    classification_json,
    classify,
    cryptomorphize,
    eq_formula,
    structure_iso_values,
    structure_type,
    witness_for,
)
from .semantics import (
    BoundsTooLarge,
    ClassDen,
    Env,
    FuelExhausted,
    Mode,
    UniverseConfig,
    engine,
    load_config,
)
from .syntax import (
    EMPTY,
    Context,
    ContextError,
    Expr,
    ParseError,
    fresh_name,
    is_set_level,
    parse,
    parse_context,
    render,
    Var,
)
from .value import LiteralError, Value, parse_value, show, to_json


class Verdict(Exception):
    """A negative answer: printed normally, exit status 1."""

    def __init__(self, text: str, payload: dict | None = None):
        super().__init__(text)
        self.text = text
        self.payload = payload or {"verdict": False, "reason": text}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Inputs


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def load_context(path: str | None) -> Context:
    return parse_context(_read(path)) if path else EMPTY


def load_gamma(path: str | None, lets: Sequence[str], cfg: UniverseConfig) -> dict[str, Value]:
    """Interpretations come from `name = literal` lines and --let flags."""
    lines = _read(path).splitlines() if path else []
    out: dict[str, Value] = {}
    for raw in [*lines, *lets]:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, eq, literal = line.partition("=")
        if not eq or not name.strip():
            raise UsageError(f"expected 'name = value', got {raw.strip()!r}")
        out[name.strip()] = literal_value(literal, cfg)
    return out


def literal_value(text: str, cfg: UniverseConfig) -> Value:
    try:
        return parse_value(text, cfg.n_atoms)
    except LiteralError as exc:
        raise UsageError(f"bad value literal {text.strip()!r}: {exc}") from None


def build_config(args: argparse.Namespace) -> UniverseConfig:
    try:
        cfg = load_config(args.config) if args.config else UniverseConfig()
    except OSError as exc:
        raise UsageError(f"cannot read {args.config}: {exc.strerror}") from None
    overrides = {
        "n_atoms": args.atoms,
        "max_rank": args.rank,
        "max_set_size": args.set_size,
        "max_fuel": args.fuel,
        "guard_ceiling": args.guard,
    }
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    if args.mode is not None:
        cfg = cfg.with_mode(Mode.EXTENDED if args.mode == "extended" else Mode.BASE)
    return cfg


def _in_context(ctx: Context, gamma: dict[str, Value], cfg: UniverseConfig) -> Env:
    sem = engine(cfg)
    env = Env(gamma)
    missing = sorted(set(ctx.names) - set(env))
    if missing:
        raise UsageError(f"no value given for {', '.join(missing)}")
    extra = sorted(set(env) - set(ctx.names))
    if extra:
        raise UsageError(f"{', '.join(extra)} is not declared in the context")
    if not sem.verdict(lambda: sem.context(ctx, cfg.max_fuel) is not None):
        raise Verdict("the context is ill-formed")
    if not sem.in_context(ctx, env, cfg.max_fuel):
        raise Verdict("the interpretation does not satisfy the context")
    return env


def _operand(text: str, ctx: Context, ty: Expr, env: Env, cfg: UniverseConfig) -> Value:
    """A literal value, or an expression evaluated at the interpretation."""
    sem = engine(cfg)
    try:
        v = parse_value(text, cfg.n_atoms)
    except LiteralError as bad:
        try:
            e = parse(text, ctx.names)
        except ParseError:
            if text.lstrip()[:1] in "{[(<" or text.strip()[:1] == "a":
                raise UsageError(f"bad value literal {text.strip()!r}: {bad}") from None
            raise
        if not sem.verdict(lambda: sem.has_type(ctx, e, ty, cfg.max_fuel)):
            raise Verdict(f"{render(e)} does not have type {render(ty)}") from None
        return sem.denote(e, env)
    if not sem.member_of(ty, env, v):
        raise Verdict(f"{show(v)} is not a value of {render(ty)}")
    return v


# ---------------------------------------------------------------------------
# Commands.  Each returns (text, json payload) or raises Verdict.


def cmd_check(args, cfg) -> tuple[str, dict]:
    ctx = load_context(args.ctx)
    e = parse(args.expr, ctx.names)
    sem = engine(cfg)
    level = "set-level" if is_set_level(e) else "class-level"
    fuel = cfg.max_fuel
    payload: dict[str, Any] = {"level": level.split("-")[0], "well_formed": False}
    if not sem.verdict(lambda: sem.defined(ctx, e, fuel)):
        payload["reason"] = "ill-formed"
        raise Verdict(f"{level}, ill-formed", payload)
    payload["well_formed"] = True
    payload["type"] = sem.is_type(ctx, e, fuel)
    payload["class"] = sem.is_class(ctx, e, fuel)
    payload["formula"] = sem.is_formula(ctx, e, fuel)
    return f"{level}, well-formed", payload


def cmd_eval(args, cfg) -> tuple[str, dict]:
    ctx = load_context(args.ctx)
    env = _in_context(ctx, load_gamma(args.gamma, args.let, cfg), cfg)
    e = parse(args.expr, ctx.names)
    sem = engine(cfg)
    if not sem.verdict(lambda: sem.defined(ctx, e, cfg.max_fuel)):
        raise Verdict("undefined", {"defined": False})
    d = sem.denote(e, env)
    if isinstance(d, ClassDen):
        members = sem.members(d)
        text = "\n".join([f"class with {len(members)} members within bounds"] + [show(m) for m in members])
        return text, {"defined": True, "kind": "class", "members": [to_json(m) for m in members]}
    return show(d), {"defined": True, "kind": "value", "value": to_json(d)}


def cmd_iso(args, cfg) -> tuple[str, dict]:
    ctx = load_context(args.ctx)
    base = cfg.with_mode(Mode.BASE)
    env = _in_context(ctx, load_gamma(args.gamma, args.let, base), base)
    ty = parse(args.type, ctx.names)
    sem = engine(base)
    if not sem.verdict(lambda: sem.is_type(ctx, ty, base.max_fuel)):
        raise Verdict(f"{render(ty)} is not a type in this context")
    a = _operand(args.u, ctx, ty, env, base)
    b = _operand(args.v, ctx, ty, env, base)
    if args.structure:
        try:
            st = structure_type(ty)
        except NotAStructureType as exc:
            raise UsageError(str(exc)) from None
        found, combo = structure_iso_values(st, a, b, base, env)
        if not found:
            raise Verdict("NoWitness", {"isomorphic": False, "witness": None})
        maps = [show(f) for f in combo]
        return "isomorphic via " + ", ".join(maps) if maps else "isomorphic (equal)", {
            "isomorphic": True,
            "bijections": [to_json(f) for f in combo],
        }
    w = witness_for(ty, env, a, b, base)
    if not w:
        raise Verdict("NoWitness", {"isomorphic": False, "witness": None})
    return f"isomorphic, witness {show(w.value)}", {"isomorphic": True, "witness": to_json(w.value)}


def cmd_classify(args, cfg) -> tuple[str, dict]:
    ctx = load_context(args.ctx)
    base = cfg.with_mode(Mode.BASE)
    env = _in_context(ctx, load_gamma(args.gamma, args.let, base), base)
    sigma = parse(args.sigma, ctx.names)
    sem = engine(base)
    if not sem.verdict(lambda: sem.is_type(ctx, sigma, base.max_fuel)):
        raise Verdict(f"{render(sigma)} is not a type in this context")
    classes = classify(ctx, sigma, env, base)
    payload = classification_json(classes)
    lines = [f"{len(classes)} classes, {payload['total']} members"]
    lines += [f"{show(c.representative)}  orbit {c.orbit}" for c in classes]
    return "\n".join(lines), payload


def cmd_eq_formula(args, cfg) -> tuple[str, dict]:
    try:
        st = structure_type(parse(args.structure))
    except NotAStructureType as exc:
        raise UsageError(str(exc)) from None
    used = set(st.carriers) | set(args.known)
    u = fresh_name("u", used)
    v = fresh_name("v", used | {u})
    used |= {u, v}
    maps = []
    for k, _ in enumerate(st.carriers, 1):
        maps.append(fresh_name(f"f{k}", used))
        used.add(maps[-1])
    try:
        phi = eq_formula(
            st.body,
            st.carrier_exprs(Var(u)),
            st.body_expr(Var(u)),
            st.carrier_exprs(Var(v)),
            st.body_expr(Var(v)),
            list(zip(st.carriers, maps)),
            known=args.known,
        )
    except UnknownCarrier as exc:
        raise UsageError(str(exc)) from None
    text = render(phi)
    return text, {
        "formula": text,
        "carriers": list(st.carriers),
        "maps": dict(zip(st.carriers, maps)),
        "instances": [u, v],
    }


def cmd_selftest(args, cfg) -> tuple[str, dict]:
    names = list(lemmas.SUITES) if args.suite == "all" else [args.suite]
    if args.depth is not None and args.depth < 1:
        raise UsageError("--depth must be at least 1")
    results = lemmas.run_all(cfg, names, args.depth)
    lines = []
    for r in results:
        tally = ", ".join(f"{k} {n}" for k, n in sorted(r.cases.items()))
        at = f" at depth {r.depth}" if r.depth else ""
        lines.append(f"{r.name}: {'PASS' if r.passed else 'FAIL'} ({r.total} checks{at}: {tally})")
        if not r.passed:
            lines.append(f"  counterexample: {r.counterexample}")
    payload = {"suites": [r.to_json() for r in results], "passed": all(r.passed for r in results)}
    if not payload["passed"]:
        raise Verdict("\n".join(lines), payload)
    return "\n".join(lines), payload


def cmd_crypto(args, cfg) -> tuple[str, dict]:
    base = cfg.with_mode(Mode.BASE)
    ctx = load_context(args.ctx)
    sigma = parse(args.sigma, ctx.names)
    sem = engine(base)
    if not sem.verdict(lambda: sem.is_type(ctx, sigma, base.max_fuel)):
        raise Verdict(f"{render(sigma)} is not a type in this context")
    try:
        c = cryptomorphize(ctx, sigma, base)
    except NotAClass as exc:
        raise UsageError(str(exc)) from None
    lines = [
        f"target: {render(c.target.expr)}",
        f"carriers: {', '.join(c.target.carriers) or '(none)'}",
        f"identity: {'yes' if c.identity else 'no'}",
    ]
    payload: dict[str, Any] = {
        "target": render(c.target.expr),
        "carriers": list(c.target.carriers),
        "identity": c.identity,
    }
    if args.verify:
        if ctx.entries:
            raise UsageError("--verify works on closed class expressions only")
        r = lemmas.SuiteResult("cryptomorphism")
        try:
            lemmas.crypto_check(sigma, base, r)
        except lemmas.Counterexample as exc:
            r.counterexample = str(exc)
        tally = ", ".join(f"{k} {n}" for k, n in sorted(r.cases.items()))
        lines.append(f"round trips and isomorphism verdicts: {'PASS' if r.passed else 'FAIL'} ({tally})")
        payload["verification"] = r.to_json()
        if not r.passed:
            lines.append(f"  counterexample: {r.counterexample}")
            raise Verdict("\n".join(lines), payload)
    return "\n".join(lines), payload


# ---------------------------------------------------------------------------
# Argument parsing


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {n}")
    return n


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: usage error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("universe")
    g.add_argument("--json", action="store_true", help="print machine-readable JSON")
    g.add_argument("--config", metavar="FILE", help="TOML file with universe settings")
    g.add_argument("--atoms", type=_positive, help="number of ur-atoms")
    g.add_argument("--rank", type=_positive, help="maximum rank of enumerated values")
    g.add_argument("--set-size", type=_positive, dest="set_size", help="maximum size of enumerated sets")
    g.add_argument("--fuel", type=_positive, help="maximum recursion index")
    g.add_argument("--mode", choices=["base", "extended"], help="language mode")
    g.add_argument("--guard", type=_positive, help="ceiling on any single enumeration")

    ctx = argparse.ArgumentParser(add_help=False)
    ctx.add_argument("--ctx", metavar="FILE", help="context file (one declaration or assumption per line)")

    gamma = argparse.ArgumentParser(add_help=False)
    gamma.add_argument("--gamma", metavar="FILE", help="interpretation file with 'name = value' lines")
    gamma.add_argument("--let", action="append", default=[], metavar="NAME=VALUE", help="one interpretation entry")

    p = _Parser(prog="isokernel", description="Check, evaluate and compare expressions of a small set-theoretic type theory.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", parents=[common, ctx], help="is an expression well-formed")
    c.add_argument("expr")
    c.set_defaults(run=cmd_check)

    c = sub.add_parser("eval", parents=[common, ctx, gamma], help="value of an expression at an interpretation")
    c.add_argument("expr")
    c.set_defaults(run=cmd_eval)

    c = sub.add_parser("iso", parents=[common, ctx, gamma], help="decide isomorphism of two values of a type")
    c.add_argument("--type", required=True, help="the type both values belong to")
    c.add_argument("--structure", action="store_true", help="decide by the structure rule instead of a witness search")
    c.add_argument("u")
    c.add_argument("v")
    c.set_defaults(run=cmd_iso)

    c = sub.add_parser("classify", parents=[common, ctx, gamma], help="isomorphism classes of a type")
    c.add_argument("sigma")
    c.set_defaults(run=cmd_classify)

    c = sub.add_parser("eq-formula", parents=[common], help="the transport formula of a structure type")
    c.add_argument("structure")
    c.add_argument("--known", action="append", default=[], metavar="NAME", help="a variable bound outside the structure")
    c.set_defaults(run=cmd_eq_formula)

    c = sub.add_parser("selftest", parents=[common], help="run the lemma suites")
    c.add_argument("suite", choices=[*lemmas.SUITES, "all"])
    c.add_argument("--depth", type=_positive, help="expression depth of the sweep (default 3 at rank 1, else 2)")
    c.set_defaults(run=cmd_selftest)

    c = sub.add_parser("crypto", parents=[common, ctx], help="present a class as a structure type")
    c.add_argument("sigma")
    c.add_argument("--verify", action="store_true", help="check round trips and isomorphism verdicts within bounds")
    c.set_defaults(run=cmd_crypto)
    return p


def _emit(args, text: str, payload: dict) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True, separators=(",", ":")))
    else:
        print(text)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
        text, payload = args.run(args, cfg)
    except Verdict as v:
        _emit(args, v.text, v.payload)
        return 1
    except UsageError as exc:
        print(f"isokernel: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"isokernel: parse error at {exc}", file=sys.stderr)
        return 2
    except ContextError as exc:
        print(f"isokernel: bad context: {exc}", file=sys.stderr)
        return 2
    except BoundsTooLarge as exc:
        print(f"isokernel: resource guard tripped: {exc}", file=sys.stderr)
        return 2
    except FuelExhausted as exc:
        print(f"isokernel: fuel ceiling reached: {exc}", file=sys.stderr)
        return 2
    except (ValueError, PreconditionFailed) as exc:
        print(f"isokernel: {exc}", file=sys.stderr)
        return 2
    _emit(args, text, payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
