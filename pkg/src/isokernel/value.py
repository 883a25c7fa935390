"""Tagged values: atoms, booleans, pairs, finite functions, finite sets and iso-pairs.

Every value carries a canonical `key` tuple.  Equality, hashing and the
total order used for sorting all go through it, so structurally equal
values are interchangeable and set elements have one normal order.
"""

from __future__ import annotations

import enum
import itertools
import json
import re
from functools import lru_cache
from typing import Any, Iterable, Mapping


class Value:
    __slots__ = ("key", "_hash", "basic")

    def _init(self, key: tuple, basic: bool) -> None:
        self.key = key
        self._hash = hash(key)
        self.basic = basic

    def __eq__(self, other: object) -> bool:
        return self is other or (isinstance(other, Value) and self._hash == other._hash and self.key == other.key)

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "Value") -> bool:
        return self.key < other.key

    def __le__(self, other: "Value") -> bool:
        return self.key <= other.key

    def __repr__(self) -> str:
        return show(self)


class Atom(Value):
    """An atom.  Ur-atoms carry a small integer; packed values carry a Value."""

    __slots__ = ("payload",)

    def __init__(self, payload: "int | Value"):
        self.payload = payload
        if isinstance(payload, Value):
            self._init((0, 1, payload.key), True)
        else:
            self._init((0, 0, int(payload)), True)


class BoolV(Value):
    __slots__ = ("truth",)

    def __init__(self, truth: bool):
        self.truth = bool(truth)
        self._init((1, int(self.truth)), True)


class PairV(Value):
    __slots__ = ("fst", "snd")

    def __init__(self, fst: Value, snd: Value):
        self.fst = fst
        self.snd = snd
        self._init((2, fst.key, snd.key), fst.basic and snd.basic)


class FunV(Value):
    """A finite function.  Its domain is the key set of its graph."""

    __slots__ = ("graph", "items")

    def __init__(self, graph: Mapping[Value, Value] | Iterable[tuple[Value, Value]]):
        pairs = dict(graph)
        self.graph = pairs
        self.items = tuple(sorted(pairs.items(), key=lambda kv: kv[0].key))
        self._init(
            (3, tuple((k.key, v.key) for k, v in self.items)),
            all(k.basic and v.basic for k, v in self.items),
        )

    def apply(self, arg: Value) -> Value:
        return self.graph[arg]

    @property
    def domain(self) -> "SetV":
        return SetV(self.graph)


class SetV(Value):
    __slots__ = ("elements", "members")

    def __init__(self, elements: Iterable[Value] = ()):
        self.members = frozenset(elements)
        self.elements = tuple(sorted(self.members, key=lambda v: v.key))
        self._init((4, tuple(v.key for v in self.elements)), all(v.basic for v in self.elements))

    def __contains__(self, v: object) -> bool:
        return v in self.members

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)


class IsoPair(Value):
    __slots__ = ("left", "right")

    def __init__(self, left: Value, right: Value):
        if not (left.basic and right.basic):
            raise ValueError("iso-pair components must be basic values")
        self.left = left
        self.right = right
        self._init((5, left.key, right.key), False)


TRUE = BoolV(True)
FALSE = BoolV(False)
BOOL_SET = SetV([FALSE, TRUE])
EMPTY_SET = SetV()


def atom(k: int) -> Atom:
    return Atom(k)


def bool_value(b: bool) -> BoolV:
    return TRUE if b else FALSE


class Side(enum.Enum):
    LEFT = "L"
    RIGHT = "R"


Left = Side.LEFT
Right = Side.RIGHT


def is_basic(v: Value) -> bool:
    return v.basic


@lru_cache(maxsize=1 << 18)
def project(v: Value, side: Side) -> Value:
    if v.basic:
        return v
    match v:
        case IsoPair():
            return v.left if side is Left else v.right
        case PairV():
            return PairV(project(v.fst, side), project(v.snd, side))
        case FunV():
            return FunV((project(k, side), project(x, side)) for k, x in v.items)
        case SetV():
            return SetV(project(x, side) for x in v.elements)
    raise TypeError(f"cannot project {v!r}")


def project_env(env: Mapping[str, Value], side: Side) -> dict[str, Value]:
    return {k: project(x, side) for k, x in env.items()}


@lru_cache(maxsize=1 << 18)
def is_bijective(v: Value) -> bool:
    if v.basic:
        return True
    match v:
        case IsoPair():
            return True
        case PairV():
            return is_bijective(v.fst) and is_bijective(v.snd)
        case FunV():
            return is_bijective(SetV(v.graph)) and all(is_bijective(x) for _, x in v.items)
        case SetV():
            if not all(is_bijective(x) for x in v.elements):
                return False
            lefts = {project(x, Left) for x in v.elements}
            rights = {project(x, Right) for x in v.elements}
            return len(lefts) == len(rights) == len(v.elements)
    return False


class MalformedPackedValue(ValueError):
    pass


class NotInjective(ValueError):
    pass


def pack(v: Value) -> Value:
    """Hide iso-pairs inside atoms; atoms are wrapped so the map stays injective."""
    match v:
        case Atom() | IsoPair():
            return Atom(v)
        case BoolV():
            return v
        case PairV():
            return PairV(pack(v.fst), pack(v.snd))
        case FunV():
            return FunV((pack(k), pack(x)) for k, x in v.items)
        case SetV():
            return SetV(pack(x) for x in v.elements)
    raise TypeError(f"cannot pack {v!r}")


def unpack(v: Value) -> Value:
    match v:
        case Atom():
            if isinstance(v.payload, (Atom, IsoPair)):
                return v.payload
            raise MalformedPackedValue(f"atom {show(v)} is not a packed atom or iso-pair")
        case BoolV():
            return v
        case PairV():
            return PairV(unpack(v.fst), unpack(v.snd))
        case FunV():
            return FunV((unpack(k), unpack(x)) for k, x in v.items)
        case SetV():
            return SetV(unpack(x) for x in v.elements)
    raise MalformedPackedValue(f"{show(v)} is not in the image of pack")


def pack_env(env: Mapping[str, Value]) -> dict[str, Value]:
    return {k: pack(x) for k, x in env.items()}


def make_iso_set(f: Mapping[Value, Value]) -> SetV:
    if len(set(f.values())) != len(f):
        raise NotInjective("the map sends two arguments to the same value")
    return SetV(IsoPair(a, b) for a, b in f.items())


# ---------------------------------------------------------------------------
# Text and JSON


def show(v: Value) -> str:
    """Render in the CLI literal syntax (`a0`, `{..}`, `(x, y)`, `[a -> b]`)."""
    match v:
        case Atom(payload=int() as k):
            return f"a{k}"
        case Atom(payload=p):
            return f"atom<{show(p)}>"
        case BoolV(truth=t):
            return "true" if t else "false"
        case PairV():
            return f"({show(v.fst)}, {show(v.snd)})"
        case FunV():
            return "[" + ", ".join(f"{show(k)} -> {show(x)}" for k, x in v.items) + "]"
        case SetV():
            return "{" + ", ".join(show(x) for x in v.elements) + "}"
        case IsoPair():
            return f"<{show(v.left)} | {show(v.right)}>"
    raise TypeError(v)


def to_json(v: Value) -> dict[str, Any]:
    match v:
        case Atom(payload=int() as k):
            return {"tag": "atom", "val": k}
        case Atom(payload=p):
            return {"tag": "atom", "val": to_json(p)}
        case BoolV(truth=t):
            return {"tag": "bool", "val": t}
        case PairV():
            return {"tag": "pair", "val": [to_json(v.fst), to_json(v.snd)]}
        case FunV():
            return {"tag": "fun", "val": [[to_json(k), to_json(x)] for k, x in v.items]}
        case SetV():
            return {"tag": "set", "val": [to_json(x) for x in v.elements]}
        case IsoPair():
            return {"tag": "isopair", "val": [to_json(v.left), to_json(v.right)]}
    raise TypeError(v)


def from_json(d: Mapping[str, Any]) -> Value:
    tag, val = d["tag"], d["val"]
    match tag:
        case "atom":
            return Atom(val if isinstance(val, int) else from_json(val))
        case "bool":
            return bool_value(val)
        case "pair":
            return PairV(from_json(val[0]), from_json(val[1]))
        case "fun":
            return FunV((from_json(k), from_json(x)) for k, x in val)
        case "set":
            return SetV(from_json(x) for x in val)
        case "isopair":
            return IsoPair(from_json(val[0]), from_json(val[1]))
    raise ValueError(f"unknown tag {tag!r}")


def dumps(v: Value) -> str:
    return json.dumps(to_json(v), separators=(",", ":"))


def rank(v: Value) -> int:
    """Nesting depth: atoms and booleans have rank 0, constructors add one."""
    match v:
        case Atom() | BoolV():
            return 0
        case PairV():
            return 1 + max(rank(v.fst), rank(v.snd))
        case IsoPair():
            return 1 + max(rank(v.left), rank(v.right))
        case FunV():
            return 1 + max((max(rank(k), rank(x)) for k, x in v.items), default=0)
        case SetV():
            return 1 + max((rank(x) for x in v.elements), default=0)
    raise TypeError(v)


def enumerate_values(
    leaves: Iterable[Value],
    max_rank: int,
    max_size: int,
    iso_pairs: bool = True,
    ceiling: int = 10**6,
) -> list[Value]:
    """Every value of rank at most `max_rank` built from `leaves`.

    Sets and function domains have at most `max_size` elements.  An
    iso-pair counts as one constructor, so its rank is one more than the
    larger of its components.
    """
    level = sorted(set(leaves))
    for _ in range(max_rank):
        basic = [v for v in level if v.basic]
        subsets = [c for k in range(min(max_size, len(level)) + 1) for c in itertools.combinations(level, k)]
        count = len(level) ** 2 + len(subsets) + (len(basic) ** 2 if iso_pairs else 0)
        count += sum(len(level) ** len(d) for d in subsets)
        if count > ceiling:
            raise OverflowError(f"{count} values exceed the ceiling {ceiling}")
        new: set[Value] = set(level)
        new.update(PairV(a, b) for a in level for b in level)
        if iso_pairs:
            new.update(IsoPair(a, b) for a in basic for b in basic)
        new.update(SetV(d) for d in subsets)
        for d in subsets:
            for image in itertools.product(level, repeat=len(d)):
                new.add(FunV(zip(d, image)))
        level = sorted(new)
    return level


class LiteralError(ValueError):
    pass


_LITERAL_TOKEN = re.compile(r"\s*(?:(atom<)|(a\d+)|(true|false)|(->)|([{}()\[\],<>|]))")


def parse_value(text: str, n_atoms: int | None = None) -> Value:
    """Read a value written in the `show` syntax.

    Tuples with more than two components nest to the right.  With `n_atoms`
    given, atoms outside the universe are rejected.
    """
    tokens: list[str] = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _LITERAL_TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise LiteralError(f"unexpected character {text[pos]!r} at offset {pos}")
        tokens.append(m.group().strip())
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    stream = iter(tokens + [""])
    look = [next(stream)]

    def peek() -> str:
        return look[0]

    def take(expected: str | None = None) -> str:
        tok = look[0]
        if expected is not None and tok != expected:
            raise LiteralError(f"expected {expected!r} but found {tok or 'end of input'!r}")
        look[0] = next(stream, "")
        return tok

    def items(close: str, item) -> list:
        out = []
        if peek() != close:
            out.append(item())
            while peek() == ",":
                take(",")
                out.append(item())
        take(close)
        return out

    def value() -> Value:
        tok = take()
        if tok == "atom<":
            inner = value()
            take(">")
            return Atom(inner)
        if re.fullmatch(r"a\d+", tok):
            k = int(tok[1:])
            if n_atoms is not None and k >= n_atoms:
                raise LiteralError(f"atom {tok} is outside the universe of {n_atoms} atoms")
            return Atom(k)
        if tok in ("true", "false"):
            return bool_value(tok == "true")
        if tok == "{":
            return SetV(items("}", value))
        if tok == "(":
            parts = items(")", value)
            if len(parts) < 2:
                raise LiteralError("a tuple needs at least two components")
            out = parts[-1]
            for p in reversed(parts[:-1]):
                out = PairV(p, out)
            return out
        if tok == "[":

            def entry() -> tuple[Value, Value]:
                k = value()
                take("->")
                return k, value()

            graph = items("]", entry)
            if len({k for k, _ in graph}) != len(graph):
                raise LiteralError("a function table lists the same argument twice")
            return FunV(graph)
        if tok == "<":
            left = value()
            take("|")
            right = value()
            take(">")
            try:
                return IsoPair(left, right)
            except ValueError as exc:
                raise LiteralError(str(exc)) from None
        raise LiteralError(f"unexpected {tok or 'end of input'!r}")

    v = value()
    if peek():
        raise LiteralError(f"trailing input starting at {peek()!r}")
    return v
