"""LTL abstract syntax, concrete syntax, negation normal form and lasso semantics.

Concrete syntax (ASCII)::

    true  false  name  !f  X f  []f  <>f  f && g  f || g  f -> g  f U g  f R g

Precedence, tightest first: unary operators, ``U``/``R`` (right associative),
``&&``, ``||``, ``->`` (right associative).  ``X``, ``U``, ``R``, ``true`` and
``false`` are reserved and cannot be used as atom names.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence


class FormulaError(ValueError):
    pass


class ParseError(FormulaError):
    def __init__(self, message: str, position: int):
        super().__init__(f"syntax error at position {position}: {message}")
        self.position = position


class UnknownAtomError(FormulaError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown atom {name!r} at position {position}")
        self.name = name
        self.position = position


@dataclass(frozen=True)
class Formula:
    def __str__(self) -> str:
        return to_string(self)


@dataclass(frozen=True)
class Const(Formula):
    value: bool


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class Next(Formula):
    arg: Formula


@dataclass(frozen=True)
class Always(Formula):
    arg: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Release(Formula):
    left: Formula
    right: Formula


def _cached_hash(self) -> int:
    # formulas are deep immutable trees hashed very often by the translator
    h = self.__dict__.get("_hash")
    if h is None:
        h = hash((type(self).__name__,) + tuple(self.__dict__[k] for k in self._fields))
        object.__setattr__(self, "_hash", h)
    return h


for _cls in (Const, Atom, Not, Next, Always, Eventually, And, Or, Implies, Until, Release):
    _cls._fields = tuple(_cls.__dataclass_fields__)
    _cls.__hash__ = _cached_hash

TRUE = Const(True)
FALSE = Const(False)

UNARY = (Not, Next, Always, Eventually)
BINARY = (And, Or, Implies, Until, Release)

_UNARY_TOKENS = {"!": Not, "X": Next, "[]": Always, "<>": Eventually}
_UNARY_SYMBOLS = {Not: "!", Next: "X ", Always: "[]", Eventually: "<>"}
_BINARY_SYMBOLS = {And: "&&", Or: "||", Implies: "->", Until: "U", Release: "R"}
_KEYWORDS = {"true", "false", "X", "U", "R"}

AtomSet = frozenset  # set of atom names true at one position


# --------------------------------------------------------------------------
# printing / traversal


def to_string(f: Formula) -> str:
    """Print ``f`` in the concrete syntax; binary nodes are always parenthesised."""
    cached = f.__dict__.get("_str")
    if cached is None:
        cached = _print(f)
        f.__dict__["_str"] = cached
    return cached


def _print(f: Formula) -> str:
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, UNARY):
        return _UNARY_SYMBOLS[type(f)] + to_string(f.arg)
    if isinstance(f, BINARY):
        op = _BINARY_SYMBOLS[type(f)]
        return f"({to_string(f.left)} {op} {to_string(f.right)})"
    raise TypeError(f"not a formula: {f!r}")


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, UNARY):
        return (f.arg,)
    if isinstance(f, BINARY):
        return (f.left, f.right)
    return ()


def subformulas(f: Formula) -> Iterator[Formula]:
    """Pre-order traversal (node before children, left before right)."""
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        stack.extend(reversed(children(g)))


def atoms(f: Formula) -> frozenset[str]:
    return frozenset(g.name for g in subformulas(f) if isinstance(g, Atom))


def size(f: Formula) -> int:
    return sum(1 for _ in subformulas(f))


# --------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<op>&&|\|\||->|\[\]|<>|!|\(|\))|(?P<ident>[A-Za-z_][A-Za-z0-9_]*))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos + 1)
        start = m.start("op") if m.group("op") else m.start("ident")
        if m.group("op"):
            tokens.append(("op", m.group("op"), start + 1))
        else:
            word = m.group("ident")
            kind = "kw" if word in _KEYWORDS else "ident"
            tokens.append((kind, word, start + 1))
        pos = m.end()
    tokens.append(("eof", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, props: frozenset[str] | None):
        self.tokens = _tokenize(text)
        self.i = 0
        self.props = props

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def at(self, value: str) -> bool:
        kind, v, _ = self.peek()
        return kind in ("op", "kw") and v == value

    def parse(self) -> Formula:
        f = self.implication()
        kind, value, pos = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected token {value!r}", pos)
        return f

    def implication(self) -> Formula:
        left = self.disjunction()
        if self.at("->"):
            self.take()
            return Implies(left, self.implication())
        return left

    def disjunction(self) -> Formula:
        left = self.conjunction()
        while self.at("||"):
            self.take()
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> Formula:
        left = self.binary_temporal()
        while self.at("&&"):
            self.take()
            left = And(left, self.binary_temporal())
        return left

    def binary_temporal(self) -> Formula:
        left = self.unary()
        if self.at("U"):
            self.take()
            return Until(left, self.binary_temporal())
        if self.at("R"):
            self.take()
            return Release(left, self.binary_temporal())
        return left

    def unary(self) -> Formula:
        kind, value, pos = self.peek()
        if kind in ("op", "kw") and value in _UNARY_TOKENS:
            self.take()
            return _UNARY_TOKENS[value](self.unary())
        return self.primary()

    def primary(self) -> Formula:
        kind, value, pos = self.take()
        if kind == "kw" and value == "true":
            return TRUE
        if kind == "kw" and value == "false":
            return FALSE
        if kind == "ident":
            if self.props is not None and value not in self.props:
                raise UnknownAtomError(value, pos)
            return Atom(value)
        if kind == "op" and value == "(":
            f = self.implication()
            kind, value, pos = self.take()
            if not (kind == "op" and value == ")"):
                raise ParseError("expected ')'", pos)
            return f
        if kind == "eof":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected token {value!r}", pos)


def parse_formula(text: str, props: Iterable[str] | None = None) -> Formula:
    """Parse ``text``; when ``props`` is given every atom must belong to it.

    Error positions are 1-based character columns; end of input is
    ``len(text) + 1``.
    """
    declared = None if props is None else frozenset(props)
    return _Parser(text, declared).parse()


# --------------------------------------------------------------------------
# negation normal form


def normalize(f: Formula) -> Formula:
    """Negation normal form over true/false/atoms/!atom/&&/||/X/U/R."""
    return _nnf(f, False)


def _nnf(f: Formula, neg: bool) -> Formula:
    if isinstance(f, Const):
        return Const(f.value != neg)
    if isinstance(f, Atom):
        return Not(f) if neg else f
    if isinstance(f, Not):
        return _nnf(f.arg, not neg)
    if isinstance(f, Next):
        return Next(_nnf(f.arg, neg))
    if isinstance(f, Eventually):
        # <>g == true U g ;  !<>g == false R !g
        if neg:
            return Release(FALSE, _nnf(f.arg, True))
        return Until(TRUE, _nnf(f.arg, False))
    if isinstance(f, Always):
        if neg:
            return Until(TRUE, _nnf(f.arg, True))
        return Release(FALSE, _nnf(f.arg, False))
    if isinstance(f, Implies):
        if neg:
            return And(_nnf(f.left, False), _nnf(f.right, True))
        return Or(_nnf(f.left, True), _nnf(f.right, False))
    if isinstance(f, And):
        op = Or if neg else And
        return op(_nnf(f.left, neg), _nnf(f.right, neg))
    if isinstance(f, Or):
        op = And if neg else Or
        return op(_nnf(f.left, neg), _nnf(f.right, neg))
    if isinstance(f, Until):
        op = Release if neg else Until
        return op(_nnf(f.left, neg), _nnf(f.right, neg))
    if isinstance(f, Release):
        op = Until if neg else Release
        return op(_nnf(f.left, neg), _nnf(f.right, neg))
    raise TypeError(f"not a formula: {f!r}")


def is_nnf(f: Formula) -> bool:
    for g in subformulas(f):
        if isinstance(g, (Always, Eventually, Implies)):
            return False
        if isinstance(g, Not) and not isinstance(g.arg, Atom):
            return False
    return True


# --------------------------------------------------------------------------
# lasso semantics


@dataclass(frozen=True)
class UltimatelyPeriodicWord:
    """The infinite word ``prefix . cycle^omega`` over sets of atom names."""

    prefix: tuple[frozenset[str], ...]
    cycle: tuple[frozenset[str], ...]

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(frozenset(x) for x in self.prefix))
        object.__setattr__(self, "cycle", tuple(frozenset(x) for x in self.cycle))
        if not self.cycle:
            raise ValueError("cycle must be nonempty")

    def __len__(self) -> int:
        return len(self.prefix) + len(self.cycle)

    @property
    def letters(self) -> tuple[frozenset[str], ...]:
        return self.prefix + self.cycle

    def successor(self, i: int) -> int:
        return i + 1 if i + 1 < len(self) else len(self.prefix)

    def at(self, i: int) -> frozenset[str]:
        """Letter at position ``i`` of the infinite word."""
        p, c = len(self.prefix), len(self.cycle)
        if i < p:
            return self.prefix[i]
        return self.cycle[(i - p) % c]


def lasso(prefix: Sequence[Iterable[str]], cycle: Sequence[Iterable[str]]) -> UltimatelyPeriodicWord:
    return UltimatelyPeriodicWord(tuple(map(frozenset, prefix)), tuple(map(frozenset, cycle)))


def eval_word(f: Formula, w: UltimatelyPeriodicWord) -> bool:
    """Decide ``w |= f`` by evaluating every subformula on the lasso positions."""
    return _positions(f, w, {})[0]


def _positions(f: Formula, w: UltimatelyPeriodicWord, memo: dict) -> list[bool]:
    if f in memo:
        return memo[f]
    n = len(w)
    letters = w.letters
    if isinstance(f, Const):
        out = [f.value] * n
    elif isinstance(f, Atom):
        out = [f.name in letters[i] for i in range(n)]
    elif isinstance(f, Not):
        out = [not v for v in _positions(f.arg, w, memo)]
    elif isinstance(f, Next):
        sub = _positions(f.arg, w, memo)
        out = [sub[w.successor(i)] for i in range(n)]
    elif isinstance(f, And):
        a, b = _positions(f.left, w, memo), _positions(f.right, w, memo)
        out = [x and y for x, y in zip(a, b)]
    elif isinstance(f, Or):
        a, b = _positions(f.left, w, memo), _positions(f.right, w, memo)
        out = [x or y for x, y in zip(a, b)]
    elif isinstance(f, Implies):
        a, b = _positions(f.left, w, memo), _positions(f.right, w, memo)
        out = [(not x) or y for x, y in zip(a, b)]
    elif isinstance(f, Eventually):
        out = _sweep([True] * n, _positions(f.arg, w, memo), w, until=True)
    elif isinstance(f, Always):
        out = _sweep([False] * n, _positions(f.arg, w, memo), w, until=False)
    elif isinstance(f, Until):
        out = _sweep(_positions(f.left, w, memo), _positions(f.right, w, memo), w, until=True)
    elif isinstance(f, Release):
        out = _sweep(_positions(f.left, w, memo), _positions(f.right, w, memo), w, until=False)
    else:
        raise TypeError(f"not a formula: {f!r}")
    memo[f] = out
    return out


def _sweep(a: list[bool], b: list[bool], w: UltimatelyPeriodicWord, until: bool) -> list[bool]:
    # Backward pass over prefix + two laps of the cycle. The value beyond the
    # window is the fixpoint seed: False for U (least), True for R (greatest).
    p = len(w.prefix)
    window = list(range(len(w))) + list(range(p, len(w)))
    nxt = not until
    vals = [False] * len(window)
    for k in range(len(window) - 1, -1, -1):
        i = window[k]
        if until:
            nxt = b[i] or (a[i] and nxt)
        else:
            nxt = b[i] and (a[i] or nxt)
        vals[k] = nxt
    return vals[: len(w)]
