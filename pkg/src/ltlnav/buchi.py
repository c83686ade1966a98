"""LTL to Buchi automaton translation and lasso acceptance.

The translation expands sets of obligations on the fly into a transition-based
generalized Buchi automaton (one acceptance set per Until subformula), then
degeneralizes with a level counter.  States are canonicalised by sorting the
printed obligations, so identical inputs always produce identical automata.
"""
from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

from .ltl import (
    FALSE,
    Atom,
    And,
    Const,
    Formula,
    Next,
    Not,
    Or,
    Release,
    Until,
    UltimatelyPeriodicWord,
    atoms,
    normalize,
    subformulas,
    to_string,
)

Literal = tuple[str, bool]


@dataclass(frozen=True)
class Guard:
    """Conjunction of literals; the empty conjunction is ``true``."""

    literals: tuple[Literal, ...] = ()

    def holds(self, letter: frozenset[str]) -> bool:
        return all((name in letter) == positive for name, positive in self.literals)

    def atoms(self) -> frozenset[str]:
        return frozenset(name for name, _ in self.literals)

    def __str__(self) -> str:
        if not self.literals:
            return "true"
        return " & ".join(name if pos else "!" + name for name, pos in self.literals)

    @classmethod
    def parse(cls, text: str) -> "Guard":
        text = text.strip()
        if text == "true":
            return cls()
        lits = []
        for part in text.split("&"):
            part = part.strip()
            positive = not part.startswith("!")
            name = part.lstrip("!").strip()
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
                raise ValueError(f"bad guard literal {part!r}")
            lits.append((name, positive))
        return cls(tuple(sorted(lits)))


@dataclass(frozen=True)
class Edge:
    src: int
    guard: Guard
    dst: int


@dataclass(frozen=True)
class BuchiAutomaton:
    states: tuple[int, ...]
    initial: frozenset[int]
    accepting: frozenset[int]
    edges: tuple[Edge, ...]
    alphabet: frozenset[str]
    formula: str = ""
    _out: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        known = set(self.states)
        if not self.initial <= known or not self.accepting <= known:
            raise ValueError("initial/accepting states must be declared states")
        out: dict[int, list[Edge]] = {q: [] for q in self.states}
        for e in self.edges:
            if e.src not in known or e.dst not in known:
                raise ValueError(f"edge {e} references an undeclared state")
            if not e.guard.atoms() <= self.alphabet:
                raise ValueError(f"guard {e.guard} uses atoms outside the alphabet")
            out[e.src].append(e)
        object.__setattr__(self, "_out", out)

    def out_edges(self, q: int) -> list[Edge]:
        return self._out[q]

    def successors(self, q: int, letter: frozenset[str]) -> list[int]:
        seen = []
        for e in self._out[q]:
            if e.dst not in seen and e.guard.holds(letter):
                seen.append(e.dst)
        return seen

    # ------------------------------------------------------------ export

    def to_json(self) -> dict:
        return {
            "formula": self.formula,
            "alphabet": sorted(self.alphabet),
            "states": list(self.states),
            "initial": sorted(self.initial),
            "accepting": sorted(self.accepting),
            "edges": [{"src": e.src, "guard": str(e.guard), "dst": e.dst} for e in self.edges],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, doc: dict) -> "BuchiAutomaton":
        return cls(
            states=tuple(doc["states"]),
            initial=frozenset(doc["initial"]),
            accepting=frozenset(doc["accepting"]),
            edges=tuple(Edge(e["src"], Guard.parse(e["guard"]), e["dst"]) for e in doc["edges"]),
            alphabet=frozenset(doc["alphabet"]),
            formula=doc.get("formula", ""),
        )

    def to_dot(self) -> str:
        lines = ["digraph buchi {", "  rankdir=LR;", '  node [shape=circle];']
        for q in self.states:
            shape = "doublecircle" if q in self.accepting else "circle"
            lines.append(f'  q{q} [label="{q}", shape={shape}];')
        for i, q in enumerate(sorted(self.initial)):
            lines.append(f'  init{i} [shape=point];')
            lines.append(f"  init{i} -> q{q};")
        for e in self.edges:
            lines.append(f'  q{e.src} -> q{e.dst} [label="{e.guard}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# tableau expansion

@dataclass(frozen=True)
class _Branch:
    literals: frozenset[Literal]
    next: frozenset[Formula]
    postponed: frozenset[Formula]


def _expand(obligations: frozenset[Formula]) -> list[_Branch]:
    """All ways of discharging ``obligations`` at the current position."""
    results: list[_Branch] = []
    # work items: (todo, literals, next, postponed, done)
    stack = [(sorted(obligations, key=to_string), frozenset(), frozenset(), frozenset(), frozenset())]
    while stack:
        todo, lits, nxt, post, done = stack.pop()
        consistent = True
        while todo:
            f = todo.pop()
            if f in done:
                continue
            done = done | {f}
            if isinstance(f, Const):
                if not f.value:
                    consistent = False
                    break
            elif isinstance(f, Atom) or (isinstance(f, Not) and isinstance(f.arg, Atom)):
                lit = (f.name, True) if isinstance(f, Atom) else (f.arg.name, False)
                if (lit[0], not lit[1]) in lits:
                    consistent = False
                    break
                lits = lits | {lit}
            elif isinstance(f, And):
                todo = todo + [f.right, f.left]
            elif isinstance(f, Next):
                nxt = nxt | {f.arg}
            elif isinstance(f, Or):
                stack.append((todo + [f.right], lits, nxt, post, done))
                todo = todo + [f.left]
            elif isinstance(f, Until):
                # postpone: left now, the until again next step
                stack.append((todo + [f.left], lits, nxt | {f}, post | {f}, done))
                todo = todo + [f.right]
            elif isinstance(f, Release):
                stack.append((todo + [f.right], lits, nxt | {f}, post, done))
                todo = todo + [f.right, f.left]
            else:
                raise ValueError(f"formula not in negation normal form: {to_string(f)}")
        if consistent:
            nxt = frozenset(g for g in nxt if not (isinstance(g, Const) and g.value))
            results.append(_Branch(frozenset(lits), nxt, post))
    unique = {(b.literals, b.next, b.postponed): b for b in results}
    return list(unique.values())


def _key(obligations: frozenset[Formula]) -> tuple[str, ...]:
    return tuple(sorted(to_string(g) for g in obligations))


@lru_cache(maxsize=1 << 16)
def _sorted_branches(obligations: frozenset[Formula]) -> tuple[_Branch, ...]:
    # expansions depend only on the obligation set, so they are shared across translations
    bs = _expand(obligations)
    bs.sort(key=lambda b: (sorted(b.literals), _key(b.next), _key(b.postponed)))
    return tuple(bs)


def translate(f: Formula, alphabet: Iterable[str] | None = None) -> BuchiAutomaton:
    """Build a Buchi automaton whose language is the set of words satisfying ``f``."""
    f = normalize(f)
    sigma = frozenset(alphabet) if alphabet is not None else atoms(f)
    if not atoms(f) <= sigma:
        raise ValueError("formula mentions atoms outside the alphabet")

    untils: list[Formula] = []
    for g in subformulas(f):
        if isinstance(g, Until) and g not in untils:
            untils.append(g)
    m = len(untils)

    def clean(obls) -> frozenset[Formula]:
        return frozenset(g for g in obls if not (isinstance(g, Const) and g.value))

    init = (clean({f}), 0)
    branches = _sorted_branches

    def next_level(level: int, branch: _Branch) -> int:
        j = 0 if level == m else level
        while j < m and untils[j] not in branch.postponed:
            j += 1
        return j

    ids: dict[tuple, int] = {init: 0}
    order = [init]
    raw_edges: list[tuple[int, Guard, int]] = []
    queue = deque([init])
    while queue:
        state = queue.popleft()
        obls, level = state
        for b in branches(obls):
            dst = (b.next, next_level(level, b))
            if dst not in ids:
                ids[dst] = len(order)
                order.append(dst)
                queue.append(dst)
            raw_edges.append((ids[state], Guard(tuple(sorted(b.literals))), ids[dst]))

    edges = []
    seen = set()
    for src, guard, dst in raw_edges:
        if (src, guard, dst) not in seen:
            seen.add((src, guard, dst))
            edges.append(Edge(src, guard, dst))
    edges.sort(key=lambda e: (e.src, e.dst, str(e.guard)))
    accepting = frozenset(ids[s] for s in order if s[1] == m)
    return BuchiAutomaton(
        states=tuple(range(len(order))),
        initial=frozenset([0]),
        accepting=accepting,
        edges=tuple(edges),
        alphabet=sigma,
        formula=to_string(f),
    )


# ---------------------------------------------------------------------------
# lasso acceptance


def accepts_lasso(b: BuchiAutomaton, w: UltimatelyPeriodicWord) -> bool:
    """True iff some run of ``b`` on ``w`` visits an accepting state infinitely often.

    Works on the product of ``b`` with the lasso graph of ``w``: a node
    ``(i, q)`` means "in state ``q``, about to read position ``i``".
    """
    letters = w.letters
    succ: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def successors(node):
        if node not in succ:
            i, q = node
            j = w.successor(i)
            succ[node] = [(j, r) for r in b.successors(q, letters[i])]
        return succ[node]

    reachable = set()
    frontier = [(0, q) for q in sorted(b.initial)]
    while frontier:
        node = frontier.pop()
        if node in reachable:
            continue
        reachable.add(node)
        frontier.extend(successors(node))

    for seed in sorted(reachable):
        if seed[1] not in b.accepting:
            continue
        # does seed reach itself?
        seen = set()
        frontier = list(successors(seed))
        while frontier:
            node = frontier.pop()
            if node == seed:
                return True
            if node in seen:
                continue
            seen.add(node)
            frontier.extend(successors(node))
    return False


def complement_formula(f: Formula) -> Formula:
    return normalize(Not(f))
