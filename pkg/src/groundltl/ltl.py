"""LTL syntax trees, prefix/infix text formats, desugaring and skeletons.

The prefix format is the one LLM prompts use: single-space separated tokens
in pre-order, e.g. ``& F b U ! b h``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

PROP_RE = re.compile(r"[A-Za-z0-9_]+")

# prefix token -> arity
OPERATOR_ARITY = {
    "!": 1,
    "X": 1,
    "F": 1,
    "G": 1,
    "&": 2,
    "|": 2,
    "i": 2,
    "e": 2,
    "U": 2,
    "W": 2,
    "M": 2,
}
RESERVED = frozenset(OPERATOR_ARITY)

# skeleton alphabet; "e" and "i" are prefix operators so they are skipped
CANONICAL_PROPS = tuple(c for c in "abcdefghijklmnopqrstuvwxyz" if c not in "ei") + ("A", "B")


class LTLSyntaxError(ValueError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at {position})"
        super().__init__(message)


class UnexpectedEndOfInput(LTLSyntaxError):
    pass


class TrailingTokens(LTLSyntaxError):
    pass


class InvalidProposition(LTLSyntaxError):
    pass


class Formula:
    """Base class of all formula nodes. Nodes are frozen and hashable."""

    __slots__ = ()

    @property
    def children(self) -> tuple[Formula, ...]:
        return ()

    def __and__(self, other: Formula) -> Formula:
        return And(self, other)

    def __or__(self, other: Formula) -> Formula:
        return Or(self, other)

    def __invert__(self) -> Formula:
        return Not(self)

    def __str__(self) -> str:
        return print_infix(self)


@dataclass(frozen=True, slots=True)
class Prop(Formula):
    name: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not PROP_RE.fullmatch(self.name):
            raise InvalidProposition(f"invalid proposition name {self.name!r}")
        if self.name in RESERVED:
            raise InvalidProposition(f"proposition name {self.name!r} is a reserved operator token")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class TrueConst(Formula):
    pass


@dataclass(frozen=True, slots=True)
class FalseConst(Formula):
    pass


@dataclass(frozen=True, slots=True)
class _Unary(Formula):
    operand: Formula

    @property
    def children(self) -> tuple[Formula, ...]:
        return (self.operand,)


@dataclass(frozen=True, slots=True)
class _Binary(Formula):
    left: Formula
    right: Formula

    @property
    def children(self) -> tuple[Formula, ...]:
        return (self.left, self.right)


@dataclass(frozen=True, slots=True)
class Not(_Unary):
    pass


@dataclass(frozen=True, slots=True)
class Next(_Unary):
    pass


@dataclass(frozen=True, slots=True)
class Finally(_Unary):
    pass


@dataclass(frozen=True, slots=True)
class Globally(_Unary):
    pass


@dataclass(frozen=True, slots=True)
class And(_Binary):
    pass


@dataclass(frozen=True, slots=True)
class Or(_Binary):
    pass


@dataclass(frozen=True, slots=True)
class Implies(_Binary):
    pass


@dataclass(frozen=True, slots=True)
class Equiv(_Binary):
    pass


@dataclass(frozen=True, slots=True)
class Until(_Binary):
    pass


@dataclass(frozen=True, slots=True)
class WeakUntil(_Binary):
    pass


@dataclass(frozen=True, slots=True)
class StrongRelease(_Binary):
    pass


@dataclass(frozen=True, slots=True)
class Release(_Binary):
    """Dual of Until; used internally by negation normal form."""


TOKEN_TO_NODE: dict[str, type[Formula]] = {
    "!": Not,
    "X": Next,
    "F": Finally,
    "G": Globally,
    "&": And,
    "|": Or,
    "i": Implies,
    "e": Equiv,
    "U": Until,
    "W": WeakUntil,
    "M": StrongRelease,
}
NODE_TO_TOKEN = {cls: tok for tok, cls in TOKEN_TO_NODE.items()}

TRUE = TrueConst()
FALSE = FalseConst()


# --- structural helpers -----------------------------------------------------


def walk(f: Formula) -> Iterator[Formula]:
    """Pre-order traversal."""
    stack = [f]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def size(f: Formula) -> int:
    return sum(1 for _ in walk(f))


def height(f: Formula) -> int:
    if not f.children:
        return 1
    return 1 + max(height(c) for c in f.children)


def props(f: Formula) -> list[str]:
    """Distinct proposition names in first-occurrence pre-order."""
    seen: dict[str, None] = {}
    for node in walk(f):
        if isinstance(node, Prop):
            seen.setdefault(node.name)
    return list(seen)


def map_props(f: Formula, fn) -> Formula:
    match f:
        case Prop(name):
            return Prop(fn(name))
        case _Unary(operand):
            return type(f)(map_props(operand, fn))
        case _Binary(left, right):
            return type(f)(map_props(left, fn), map_props(right, fn))
        case _:
            return f


# --- prefix format ----------------------------------------------------------


def parse_prefix(text: str) -> Formula:
    tokens = text.split()
    if not tokens:
        raise UnexpectedEndOfInput("empty formula", 0)
    pos = 0

    # explicit stack instead of recursion: formulas from models can be long
    # frames are [node class, collected children, needed arity]
    stack: list[list] = []
    result: Formula | None = None
    while True:
        if pos >= len(tokens):
            raise UnexpectedEndOfInput("formula ended while operands were still expected", pos)
        tok = tokens[pos]
        pos += 1
        arity = OPERATOR_ARITY.get(tok)
        if arity is not None:
            stack.append([TOKEN_TO_NODE[tok], [], arity])
            continue
        if not PROP_RE.fullmatch(tok):
            raise LTLSyntaxError(f"invalid token {tok!r}", pos - 1)
        node: Formula = Prop(tok)
        while stack:
            frame = stack[-1]
            frame[1].append(node)
            if len(frame[1]) < frame[2]:
                break
            stack.pop()
            node = frame[0](*frame[1])
        else:
            result = node
            break
    if pos != len(tokens):
        raise TrailingTokens(f"unexpected tokens after complete formula: {' '.join(tokens[pos:])!r}", pos)
    return result


def _constant_prop(f: Formula) -> str:
    names = props(f)
    return names[0] if names else "a"


def print_prefix(f: Formula) -> str:
    out: list[str] = []
    anchor = None

    def emit(node: Formula) -> None:
        nonlocal anchor
        match node:
            case Prop(name):
                out.append(name)
            case TrueConst() | FalseConst():
                # the token format has no constants; spell out a tautology
                if anchor is None:
                    anchor = _constant_prop(f)
                if isinstance(node, FalseConst):
                    out.extend(["&", anchor, "!", anchor])
                else:
                    out.extend(["|", anchor, "!", anchor])
            case Release(left, right):
                emit(Not(Until(Not(left), Not(right))))
            case _:
                out.append(NODE_TO_TOKEN[type(node)])
                for child in node.children:
                    emit(child)

    emit(f)
    return " ".join(out)


# --- infix format -----------------------------------------------------------

_INFIX_TOKEN_RE = re.compile(r"\s*(<->|->|[()!&|]|[A-Za-z0-9_]+)")
_UNARY_WORDS = {"X": Next, "F": Finally, "G": Globally}
_TEMPORAL_BINARY = {"U": Until, "W": WeakUntil, "M": StrongRelease, "R": Release}


def _tokenize_infix(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _INFIX_TOKEN_RE.match(text, pos)
        if not m:
            raise LTLSyntaxError(f"unexpected character {text[pos:].lstrip()[:1]!r}", pos)
        tokens.append((m.group(1), m.start(1)))
        pos = m.end()
    return tokens


class _InfixParser:
    # precedence, loosest first: <->, ->, |, &, U/W/M/R, unary

    def __init__(self, text: str):
        self.tokens = _tokenize_infix(text)
        self.i = 0
        self.length = len(text)

    def peek(self) -> str | None:
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def position(self) -> int:
        return self.tokens[self.i][1] if self.i < len(self.tokens) else self.length

    def take(self) -> str:
        if self.i >= len(self.tokens):
            raise UnexpectedEndOfInput("unexpected end of formula", self.length)
        tok = self.tokens[self.i][0]
        self.i += 1
        return tok

    def expect(self, tok: str) -> None:
        pos = self.position()
        got = self.take()
        if got != tok:
            raise LTLSyntaxError(f"expected {tok!r}, got {got!r}", pos)

    def parse(self) -> Formula:
        f = self.equiv()
        if self.peek() is not None:
            raise TrailingTokens(f"unexpected token {self.peek()!r}", self.position())
        return f

    def equiv(self) -> Formula:
        f = self.implies()
        while self.peek() == "<->":
            self.take()
            f = Equiv(f, self.implies())
        return f

    def implies(self) -> Formula:
        f = self.disj()
        if self.peek() == "->":
            self.take()
            return Implies(f, self.implies())
        return f

    def disj(self) -> Formula:
        f = self.conj()
        while self.peek() == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.temporal()
        while self.peek() == "&":
            self.take()
            f = And(f, self.temporal())
        return f

    def temporal(self) -> Formula:
        f = self.unary()
        tok = self.peek()
        if tok in _TEMPORAL_BINARY:
            self.take()
            return _TEMPORAL_BINARY[tok](f, self.temporal())
        return f

    def unary(self) -> Formula:
        pos = self.position()
        tok = self.take()
        if tok == "!":
            return Not(self.unary())
        if tok in _UNARY_WORDS:
            return _UNARY_WORDS[tok](self.unary())
        if tok == "(":
            f = self.equiv()
            self.expect(")")
            return f
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        if tok in ("i", "e"):
            raise InvalidProposition(f"proposition name {tok!r} is reserved", pos)
        if tok in _TEMPORAL_BINARY or not PROP_RE.fullmatch(tok):
            raise LTLSyntaxError(f"unexpected token {tok!r}", pos)
        return Prop(tok)


def parse_infix(text: str) -> Formula:
    return _InfixParser(text).parse()


_INFIX_BINARY = {
    And: "&",
    Or: "|",
    Implies: "->",
    Equiv: "<->",
    Until: "U",
    WeakUntil: "W",
    StrongRelease: "M",
    Release: "R",
}


def print_infix(f: Formula) -> str:
    match f:
        case Prop(name):
            return name
        case TrueConst():
            return "true"
        case FalseConst():
            return "false"
        case Not(g):
            return f"!({print_infix(g)})"
        case Next(g):
            return f"X({print_infix(g)})"
        case Finally(g):
            return f"F({print_infix(g)})"
        case Globally(g):
            return f"G({print_infix(g)})"
        case _Binary(left, right):
            return f"{_infix_operand(left)} {_INFIX_BINARY[type(f)]} {_infix_operand(right)}"
    raise TypeError(f"not a formula: {f!r}")


def _infix_operand(f: Formula) -> str:
    text = print_infix(f)
    return f"({text})" if isinstance(f, _Binary) else text


# --- JSON -------------------------------------------------------------------

_JSON_NAMES = {
    Not: "not",
    Next: "next",
    Finally: "finally",
    Globally: "globally",
    And: "and",
    Or: "or",
    Implies: "implies",
    Equiv: "equiv",
    Until: "until",
    WeakUntil: "weak_until",
    StrongRelease: "strong_release",
    Release: "release",
    TrueConst: "true",
    FalseConst: "false",
}
_JSON_CLASSES = {v: k for k, v in _JSON_NAMES.items()}


def to_json(f: Formula) -> dict:
    if isinstance(f, Prop):
        return {"prop": f.name}
    return {"op": _JSON_NAMES[type(f)], "args": [to_json(c) for c in f.children]}


def from_json(obj: dict) -> Formula:
    if "prop" in obj:
        return Prop(obj["prop"])
    cls = _JSON_CLASSES[obj["op"]]
    return cls(*(from_json(a) for a in obj.get("args", [])))


# --- rewriting --------------------------------------------------------------


def desugar(f: Formula) -> Formula:
    """Rewrite into Prop/Not/Or/And/Next/Until.

    Truth is spelled ``p | !p`` for a proposition ``p`` of the input, so the
    result stays inside the prefix token format.
    """
    anchor = Prop(_constant_prop(f))
    true = Or(anchor, Not(anchor))

    def go(g: Formula) -> Formula:
        match g:
            case Prop():
                return g
            case TrueConst():
                return true
            case FalseConst():
                return Not(true)
            case Not(a):
                return Not(go(a))
            case Next(a):
                return Next(go(a))
            case Finally(a):
                return Until(true, go(a))
            case Globally(a):
                return Not(Until(true, Not(go(a))))
            case And(a, b):
                return And(go(a), go(b))
            case Or(a, b):
                return Or(go(a), go(b))
            case Implies(a, b):
                return Or(Not(go(a)), go(b))
            case Equiv(a, b):
                x, y = go(a), go(b)
                return Or(And(x, y), And(Not(x), Not(y)))
            case Until(a, b):
                return Until(go(a), go(b))
            case WeakUntil(a, b):
                # a W b = a U (b | G a)
                return go(Until(a, Or(b, Globally(a))))
            case StrongRelease(a, b):
                # a M b = b U (a & b)
                return go(Until(b, And(a, b)))
            case Release(a, b):
                return Not(Until(Not(go(a)), Not(go(b))))
        raise TypeError(f"not a formula: {g!r}")

    return go(f)


def skeletonize(f: Formula) -> tuple[Formula, dict[str, str]]:
    """Rename propositions to a, b, c, ... by first pre-order occurrence."""
    names = props(f)
    if len(names) > len(CANONICAL_PROPS):
        raise ValueError(f"too many propositions for a skeleton: {len(names)} > {len(CANONICAL_PROPS)}")
    mapping = dict(zip(names, CANONICAL_PROPS))
    return map_props(f, mapping.__getitem__), mapping


def substitute(f: Formula, mapping: dict[str, str]) -> Formula:
    missing = set(props(f)) - set(mapping)
    if missing:
        raise KeyError(f"no substitution for propositions {sorted(missing)}")
    return map_props(f, mapping.__getitem__)


def conj(parts: list[Formula]) -> Formula:
    """Right-nested conjunction."""
    result = parts[-1]
    for p in reversed(parts[:-1]):
        result = And(p, result)
    return result


def disj(parts: list[Formula]) -> Formula:
    result = parts[-1]
    for p in reversed(parts[:-1]):
        result = Or(p, result)
    return result
