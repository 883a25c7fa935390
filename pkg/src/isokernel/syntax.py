"""Abstract syntax, parser and printer for the kernel language.

Expressions are immutable and hashable so they can key memo tables.
Bound variables are renamed at parse time so that no binder shadows a
name already in scope and no binder reuses a free variable's name.
"""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass, fields
from typing import Iterable, Iterator, Mapping


class Expr:
    """Base class for all expression nodes."""

    __slots__ = ()

    def _parts(self) -> tuple:
        p = self.__dict__.get("_p")
        if p is None:
            p = tuple(getattr(self, name) for name in _field_names(type(self)))
            object.__setattr__(self, "_p", p)
        return p

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if type(self) is not type(other):
            return False
        return hash(self) == hash(other) and self._parts() == other._parts()

    def __hash__(self) -> int:
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((type(self).__name__,) + self._parts())
            object.__setattr__(self, "_h", h)
        return h

    def __str__(self) -> str:
        return render(self)


_FIELD_CACHE: dict[type, tuple[str, ...]] = {}


def _field_names(cls: type) -> tuple[str, ...]:
    names = _FIELD_CACHE.get(cls)
    if names is None:
        names = tuple(f.name for f in fields(cls))
        _FIELD_CACHE[cls] = names
    return names


node = dataclass(frozen=True, eq=False)


@node
class ConstSet(Expr):
    pass


@node
class ConstBij(Expr):
    pass


@node
class ConstBool(Expr):
    pass


@node
class Var(Expr):
    name: str


@node
class Pair(Expr):
    fst: Expr
    snd: Expr


@node
class Proj(Expr):
    index: int
    arg: Expr


@node
class Lambda(Expr):
    var: str
    domain: Expr
    body: Expr


@node
class App(Expr):
    fun: Expr
    arg: Expr


@node
class Eq(Expr):
    lhs: Expr
    rhs: Expr


@node
class IsoEq(Expr):
    lhs: Expr
    rhs: Expr
    type: Expr


@node
class Forall(Expr):
    var: str
    domain: Expr
    body: Expr


@node
class Not(Expr):
    arg: Expr


@node
class Or(Expr):
    lhs: Expr
    rhs: Expr


@node
class And(Expr):
    lhs: Expr
    rhs: Expr


@node
class Implies(Expr):
    lhs: Expr
    rhs: Expr


@node
class Iff(Expr):
    lhs: Expr
    rhs: Expr


@node
class Pi(Expr):
    var: str
    domain: Expr
    body: Expr


@node
class Sigma(Expr):
    var: str
    domain: Expr
    body: Expr


@node
class Sub(Expr):
    var: str
    domain: Expr
    body: Expr


SET = ConstSet()
BIJ = ConstBij()
BOOL = ConstBool()

BINDERS = (Lambda, Forall, Pi, Sigma, Sub)
BINARY_FORMULAS = (Or, And, Implies, Iff)
FORMULAS = (Eq, IsoEq, Forall, Not) + BINARY_FORMULAS


def Exists(var: str, domain: Expr, body: Expr) -> Expr:
    """`exists (x:A) P` is shorthand for `~ forall (x:A) ~P`."""
    return Not(Forall(var, domain, Not(body)))


def children(e: Expr) -> tuple[Expr, ...]:
    return tuple(p for p in e._parts() if isinstance(p, Expr))


def rebuild(e: Expr, kids: Iterable[Expr]) -> Expr:
    """Return a node of the same shape as `e` with its child expressions replaced."""
    kids = iter(kids)
    parts = [next(kids) if isinstance(p, Expr) else p for p in e._parts()]
    return type(e)(*parts)


def subexpressions(e: Expr) -> Iterator[Expr]:
    yield e
    for c in children(e):
        yield from subexpressions(c)


def contains_bij(e: Expr) -> bool:
    return any(isinstance(x, ConstBij) for x in subexpressions(e))


# ---------------------------------------------------------------------------
# Free variables, fresh names, substitution


def free_vars(e: Expr) -> frozenset[str]:
    cached = e.__dict__.get("_fv")
    if cached is not None:
        return cached
    match e:
        case Var(name):
            out = frozenset((name,))
        case Lambda(x, dom, body) | Forall(x, dom, body) | Pi(x, dom, body) | Sigma(
            x, dom, body
        ) | Sub(x, dom, body):
            out = free_vars(dom) | (free_vars(body) - {x})
        case _:
            out = frozenset().union(*(free_vars(c) for c in children(e)))
    object.__setattr__(e, "_fv", out)
    return out


def bound_vars(e: Expr) -> set[str]:
    return {x.var for x in subexpressions(e) if isinstance(x, BINDERS)}


def fresh_name(base: str, used: Iterable[str]) -> str:
    used = set(used)
    stem = re.sub(r"_\d+$", "", base) or "_"
    if stem not in used and stem != "_":
        return stem
    for k in itertools.count(1):
        cand = f"{stem}_{k}" if stem != "_" else f"_{k}"
        if cand not in used:
            return cand
    raise AssertionError("unreachable")


def substitute(e: Expr, s: Mapping[str, Expr]) -> Expr:
    """Capture-avoiding simultaneous substitution."""
    s = {k: v for k, v in s.items() if k in free_vars(e)}
    if not s:
        return e
    match e:
        case Var(name):
            return s.get(name, e)
        case Lambda(x, dom, body) | Forall(x, dom, body) | Pi(x, dom, body) | Sigma(
            x, dom, body
        ) | Sub(x, dom, body):
            dom2 = substitute(dom, s)
            inner = {k: v for k, v in s.items() if k != x and k in free_vars(body)}
            incoming = frozenset().union(*(free_vars(v) for v in inner.values()))
            if x in incoming:
                y = fresh_name(x, incoming | free_vars(body) | set(inner) | bound_vars(body))
                inner[x] = Var(y)
                x = y
            return type(e)(x, dom2, substitute(body, inner))
        case _:
            return rebuild(e, (substitute(c, s) for c in children(e)))


def alpha_eq(a: Expr, b: Expr) -> bool:
    return _alpha(a, b, {}, {}, 0)


def _alpha(a: Expr, b: Expr, ma: dict, mb: dict, depth: int) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Var):
        la, lb = ma.get(a.name), mb.get(b.name)
        if la is None and lb is None:
            return a.name == b.name
        return la == lb
    if isinstance(a, BINDERS):
        if not _alpha(a.domain, b.domain, ma, mb, depth):
            return False
        return _alpha(a.body, b.body, {**ma, a.var: depth}, {**mb, b.var: depth}, depth + 1)
    if isinstance(a, Proj) and a.index != b.index:
        return False
    return all(_alpha(x, y, ma, mb, depth) for x, y in zip(children(a), children(b)))


def normalize_binders(e: Expr, avoid: Iterable[str] = ()) -> Expr:
    """Rename binders so every bound name is unique and differs from free names."""
    used = set(free_vars(e)) | set(avoid)
    return _normalize(e, {}, used)


def _normalize(e: Expr, ren: dict[str, str], used: set[str]) -> Expr:
    match e:
        case Var(name):
            return Var(ren.get(name, name))
        case Lambda(x, dom, body) | Forall(x, dom, body) | Pi(x, dom, body) | Sigma(
            x, dom, body
        ) | Sub(x, dom, body):
            dom2 = _normalize(dom, ren, used)
            y = fresh_name(x, used)
            used.add(y)
            return type(e)(y, dom2, _normalize(body, {**ren, x: y}, used))
        case _:
            return rebuild(e, (_normalize(c, ren, used) for c in children(e)))


# ---------------------------------------------------------------------------
# Set-level / class-level


class Level(enum.Enum):
    SET = "set-level"
    CLASS = "class-level"


SetLevel = Level.SET
ClassLevel = Level.CLASS


def classify_level(e: Expr) -> Level:
    return Level.SET if is_set_level(e) else Level.CLASS


def is_set_level(e: Expr) -> bool:
    cached = e.__dict__.get("_sl")
    if cached is not None:
        return cached
    if isinstance(e, FORMULAS):
        out = True
    elif isinstance(e, (ConstSet, ConstBij)):
        out = False
    elif isinstance(e, Sub):
        out = is_set_level(e.domain)
    else:
        out = all(is_set_level(c) for c in children(e))
    object.__setattr__(e, "_sl", out)
    return out


# ---------------------------------------------------------------------------
# Contexts


@dataclass(frozen=True)
class Decl:
    var: str
    type: Expr


@dataclass(frozen=True)
class Assume:
    formula: Expr


class ContextError(ValueError):
    pass


@dataclass(frozen=True)
class Context:
    entries: tuple[Decl | Assume, ...] = ()

    def __hash__(self) -> int:
        h = self.__dict__.get("_h")
        if h is None:
            h = hash(self.entries)
            object.__setattr__(self, "_h", h)
        return h

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for entry in self.entries:
            expr = entry.type if isinstance(entry, Decl) else entry.formula
            missing = free_vars(expr) - seen
            if missing:
                raise ContextError(f"undeclared variable(s) {sorted(missing)} in {render(expr)}")
            if isinstance(entry, Decl):
                if entry.var in seen:
                    raise ContextError(f"variable {entry.var} declared twice")
                seen.add(entry.var)
        object.__setattr__(self, "_names", frozenset(seen))

    @property
    def names(self) -> frozenset[str]:
        return self._names  # type: ignore[attr-defined]

    def type_of(self, name: str) -> Expr | None:
        for entry in reversed(self.entries):
            if isinstance(entry, Decl) and entry.var == name:
                return entry.type
        return None

    def declare(self, name: str, type_: Expr) -> "Context":
        return Context(self.entries + (Decl(name, type_),))

    def assume(self, formula: Expr) -> "Context":
        return Context(self.entries + (Assume(formula),))

    def bind(self, name: str, type_: Expr, body: Expr) -> tuple["Context", str, Expr]:
        """Extend with a binder, renaming it if the name is already declared."""
        if name in self.names:
            new = fresh_name(name, self.names | free_vars(body) | bound_vars(body))
            body = substitute(body, {name: Var(new)})
            name = new
        return self.declare(name, type_), name, body

    def split_last(self) -> tuple["Context", Decl | Assume]:
        return Context(self.entries[:-1]), self.entries[-1]

    def __len__(self) -> int:
        return len(self.entries)

    def __str__(self) -> str:
        return render_context(self)


EMPTY = Context()


# ---------------------------------------------------------------------------
# Lexer and parser


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int, expected: Iterable[str] = ()):
        self.line = line
        self.col = col
        self.message = message
        self.expected = sorted(set(expected))
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{line}:{col}: {message}{detail}")


KEYWORDS = {"Set", "Bij", "Bool", "pi1", "pi2", "fun", "Pi", "Sigma", "Sub", "forall", "exists", "assume"}
_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<op><=>|=>|=\[|->|\\/|/\\|[()\],:=~*])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "ws":
            chunk = m.group()
            if "\n" in chunk:
                line += chunk.count("\n")
                line_start = pos + chunk.rindex("\n") + 1
        else:
            word = m.group()
            if kind == "ident" and word in KEYWORDS:
                kind = "op"
            out.append(Token(kind, word, line, pos - line_start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


_BINDER_WORDS = {"fun", "Pi", "Sigma", "Sub", "forall", "exists"}
_ATOM_START = {"Set", "Bij", "Bool", "(", "pi1", "pi2", "<ident>"} | _BINDER_WORDS
_EXPR_START = _ATOM_START | {"~"}


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, *texts: str) -> bool:
        return self.tok.kind == "op" and self.tok.text in texts

    def fail(self, expected: Iterable[str]) -> ParseError:
        t = self.tok
        shown = t.text if t.kind != "eof" else "end of input"
        return ParseError(f"unexpected {shown!r}", t.line, t.col, expected)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.fail([text])
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        if self.tok.kind != "ident":
            raise self.fail(["<ident>"])
        name = self.tok.text
        self.i += 1
        return name

    def finish(self) -> None:
        if self.tok.kind != "eof":
            raise self.fail(["<end>", "<=>", "=>", "\\/", "/\\", "=", "=[", "->", "*", "("])

    def expr(self) -> Expr:
        return self.iff()

    def iff(self) -> Expr:
        e = self.implies()
        while self.at("<=>"):
            self.i += 1
            e = Iff(e, self.implies())
        return e

    def implies(self) -> Expr:
        e = self.disj()
        if self.at("=>"):
            self.i += 1
            return Implies(e, self.implies())
        return e

    def disj(self) -> Expr:
        e = self.conj()
        while self.at("\\/"):
            self.i += 1
            e = Or(e, self.conj())
        return e

    def conj(self) -> Expr:
        e = self.neg()
        while self.at("/\\"):
            self.i += 1
            e = And(e, self.neg())
        return e

    def neg(self) -> Expr:
        if self.at("~"):
            self.i += 1
            return Not(self.neg())
        return self.equality()

    def equality(self) -> Expr:
        e = self.arrow()
        if self.at("="):
            self.i += 1
            return Eq(e, self.arrow())
        if self.at("=["):
            self.i += 1
            ty = self.expr()
            self.expect("]")
            return IsoEq(e, self.arrow(), ty)
        return e

    def arrow(self) -> Expr:
        e = self.product()
        if self.at("->"):
            self.i += 1
            return Pi("_", e, self.arrow())
        return e

    def product(self) -> Expr:
        e = self.prefix()
        if self.at("*"):
            self.i += 1
            return Sigma("_", e, self.product())
        return e

    def prefix(self) -> Expr:
        if self.at("pi1", "pi2"):
            k = 1 if self.tok.text == "pi1" else 2
            self.i += 1
            return Proj(k, self.prefix())
        return self.postfix()

    def postfix(self) -> Expr:
        e = self.primary()
        while self.at("("):
            self.i += 1
            arg = self.expr()
            if self.at(","):
                self.i += 1
                arg = Pair(arg, self.expr())
            self.expect(")")
            e = App(e, arg)
        return e

    def binder_head(self) -> tuple[str, Expr]:
        self.expect("(")
        name = self.ident()
        self.expect(":")
        dom = self.expr()
        self.expect(")")
        return name, dom

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "ident":
            self.i += 1
            return Var(t.text)
        if t.kind != "op" or t.text not in _ATOM_START:
            raise self.fail(_EXPR_START)
        self.i += 1
        match t.text:
            case "Set":
                return SET
            case "Bij":
                return BIJ
            case "Bool":
                return BOOL
            case "(":
                e = self.expr()
                if self.at(","):
                    self.i += 1
                    e = Pair(e, self.expr())
                self.expect(")")
                return e
            case "fun":
                x, dom = self.binder_head()
                self.expect("=>")
                return Lambda(x, dom, self.expr())
            case "exists":
                x, dom = self.binder_head()
                return Exists(x, dom, self.expr())
            case word:
                x, dom = self.binder_head()
                cls = {"Pi": Pi, "Sigma": Sigma, "Sub": Sub, "forall": Forall}[word]
                return cls(x, dom, self.expr())


def parse_raw(text: str) -> Expr:
    """Parse without renaming binders."""
    p = _Parser(text)
    e = p.expr()
    p.finish()
    return e


def parse(text: str, avoid: Iterable[str] = ()) -> Expr:
    return normalize_binders(parse_raw(text), avoid)


def parse_context(text: str) -> Context:
    """Parse a context file: one `name : type` or `assume formula` per line.

    Blank lines and lines starting with `#` are ignored.
    """
    entries: list[Decl | Assume] = []
    names: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            m = re.match(r"assume\b(.*)$", line)
            if m:
                entries.append(Assume(parse(m.group(1), names)))
                continue
            m = re.match(r"([A-Za-z_][A-Za-z0-9_']*)\s*:(?!=)(.*)$", line)
            if not m or m.group(1) in KEYWORDS:
                raise ParseError("expected `name : type` or `assume formula`", 1, 1, ["<ident>", "assume"])
            entries.append(Decl(m.group(1), parse(m.group(2), names | {m.group(1)})))
            names.add(m.group(1))
        except ParseError as err:
            raise ParseError(err.message, lineno, err.col, err.expected) from None
    try:
        return Context(tuple(entries))
    except ContextError as err:
        raise ParseError(str(err), len(text.splitlines()), 1) from None


# ---------------------------------------------------------------------------
# Printer

_LEVEL = {
    Iff: 1,
    Implies: 2,
    Or: 3,
    And: 4,
    Not: 5,
    Eq: 6,
    IsoEq: 6,
    Proj: 9,
    App: 10,
}


def _level(e: Expr) -> int:
    if isinstance(e, (Pi, Sigma)) and e.var not in free_vars(e.body):
        return 7 if isinstance(e, Pi) else 8
    if isinstance(e, BINDERS) or _exists_parts(e):
        return 0
    return _LEVEL.get(type(e), 11)


def _exists_parts(e: Expr) -> tuple[str, Expr, Expr] | None:
    if isinstance(e, Not) and isinstance(e.arg, Forall) and isinstance(e.arg.body, Not):
        return e.arg.var, e.arg.domain, e.arg.body.arg
    return None


def render(e: Expr) -> str:
    return _render(e)


def _wrap(e: Expr, min_level: int) -> str:
    s = _render(e)
    return f"({s})" if _level(e) < min_level else s


def _render(e: Expr) -> str:
    ex = _exists_parts(e)
    if ex:
        x, dom, body = ex
        return f"exists ({x} : {_render(dom)}) {_render(body)}"
    lvl = _level(e)
    match e:
        case ConstSet():
            return "Set"
        case ConstBij():
            return "Bij"
        case ConstBool():
            return "Bool"
        case Var(name):
            return name
        case Pair(a, b):
            return f"({_render(a)}, {_render(b)})"
        case Proj(k, a):
            return f"pi{k} {_wrap(a, 9)}"
        case App(f, Pair(a, b)):
            return f"{_wrap(f, 10)}({_render(a)}, {_render(b)})"
        case App(f, a):
            return f"{_wrap(f, 10)}({_render(a)})"
        case Eq(a, b):
            return f"{_wrap(a, 7)} = {_wrap(b, 7)}"
        case IsoEq(a, b, t):
            return f"{_wrap(a, 7)} =[{_render(t)}] {_wrap(b, 7)}"
        case Not(a):
            return f"~{_wrap(a, 5)}"
        case Iff(a, b):
            return f"{_wrap(a, 1)} <=> {_wrap(b, 2)}"
        case Implies(a, b):
            return f"{_wrap(a, 3)} => {_wrap(b, 2)}"
        case Or(a, b):
            return f"{_wrap(a, 3)} \\/ {_wrap(b, 4)}"
        case And(a, b):
            return f"{_wrap(a, 4)} /\\ {_wrap(b, 5)}"
        case Pi(x, a, b) if lvl == 7:
            return f"{_wrap(a, 8)} -> {_wrap(b, 7)}"
        case Sigma(x, a, b) if lvl == 8:
            return f"{_wrap(a, 9)} * {_wrap(b, 8)}"
        case Lambda(x, a, b):
            return f"fun ({x} : {_render(a)}) => {_render(b)}"
        case Forall(x, a, b) | Pi(x, a, b) | Sigma(x, a, b) | Sub(x, a, b):
            word = {Forall: "forall", Pi: "Pi", Sigma: "Sigma", Sub: "Sub"}[type(e)]
            return f"{word} ({x} : {_render(a)}) {_render(b)}"
    raise TypeError(f"not an expression: {e!r}")


def render_context(ctx: Context) -> str:
    lines = []
    for entry in ctx.entries:
        if isinstance(entry, Decl):
            lines.append(f"{entry.var} : {render(entry.type)}")
        else:
            lines.append(f"assume {render(entry.formula)}")
    return "\n".join(lines)
