"""Exhaustive agreement sweeps between the automaton route and the semantic route.

A :class:`LassoFamily` is every combination of a set of prefixes with a set of
cycles.  The semantic side evaluates formulas on all lassos at once (padded
numpy arrays, windowed fixpoint sweep); the automaton side composes boolean
transfer matrices along each cycle.  Both produce a (prefix x cycle) table.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .buchi import BuchiAutomaton, accepts_lasso, translate
from .ltl import (
    TRUE,
    Always,
    And,
    Atom,
    Const,
    Eventually,
    Formula,
    Implies,
    Next,
    Not,
    Or,
    Release,
    UltimatelyPeriodicWord,
    Until,
    eval_word,
    normalize,
)

ALL_UNARY = (Not, Next, Always, Eventually)
ALL_BINARY = (And, Or, Implies, Until, Release)


def enumerate_formulas(
    names: Sequence[str],
    max_size: int,
    unary=ALL_UNARY,
    binary=ALL_BINARY,
    constants: Sequence[Formula] = (TRUE,),
) -> Iterator[Formula]:
    """Every formula tree with at most ``max_size`` nodes, smallest first."""
    by_size: dict[int, list[Formula]] = {1: list(constants) + [Atom(n) for n in names]}
    for s in range(2, max_size + 1):
        level = [op(g) for op in unary for g in by_size[s - 1]]
        for left_size in range(1, s - 1):
            right_size = s - 1 - left_size
            for op in binary:
                level.extend(op(a, b) for a in by_size[left_size] for b in by_size[right_size])
        by_size[s] = level
    for s in range(1, max_size + 1):
        yield from by_size[s]


def enumerate_lassos(names: Sequence[str], max_prefix: int, max_cycle: int) -> Iterator[UltimatelyPeriodicWord]:
    letters = [frozenset(c) for r in range(len(names) + 1) for c in itertools.combinations(sorted(names), r)]
    for p in range(max_prefix + 1):
        for c in range(1, max_cycle + 1):
            for pre in itertools.product(letters, repeat=p):
                for cyc in itertools.product(letters, repeat=c):
                    yield UltimatelyPeriodicWord(pre, cyc)


@dataclass
class LassoFamily:
    """Every combination of ``prefixes`` with ``cycles`` (letters as bitmasks over ``names``)."""

    names: tuple[str, ...]
    prefixes: list[tuple[int, ...]]
    cycles: list[tuple[int, ...]]
    _padded: dict = field(default_factory=dict, repr=False)

    @classmethod
    def bounded(cls, names: Sequence[str], max_prefix: int, max_cycle: int) -> "LassoFamily":
        names = tuple(sorted(names))
        k = 1 << len(names)
        prefixes = [t for p in range(max_prefix + 1) for t in itertools.product(range(k), repeat=p)]
        cycles = [t for c in range(1, max_cycle + 1) for t in itertools.product(range(k), repeat=c)]
        return cls(names, prefixes, cycles)

    def __len__(self) -> int:
        return len(self.prefixes) * len(self.cycles)

    def letter(self, code: int) -> frozenset[str]:
        return frozenset(n for b, n in enumerate(self.names) if code >> b & 1)

    def word(self, i: int, j: int) -> UltimatelyPeriodicWord:
        return UltimatelyPeriodicWord(
            tuple(map(self.letter, self.prefixes[i])), tuple(map(self.letter, self.cycles[j]))
        )

    def words(self) -> Iterator[UltimatelyPeriodicWord]:
        for i in range(len(self.prefixes)):
            for j in range(len(self.cycles)):
                yield self.word(i, j)

    def padded(self) -> "_Padded":
        if "p" not in self._padded:
            self._padded["p"] = _Padded.build(self)
        return self._padded["p"]


@dataclass
class _Padded:
    """All lassos of a family in row-major (prefix, cycle) order, padded to a common length."""

    codes: np.ndarray  # (L, n_max)
    succ: np.ndarray  # (L, n_max) successor position, padding maps to itself
    window: np.ndarray  # (L, w_max) lasso position visited at window step k
    window_len: np.ndarray  # (L,)
    flat_window: np.ndarray  # (w_max, L) flat indices into an (L, n_max) array
    pad_mask: np.ndarray  # (w_max, L) true past the end of a row's window

    @classmethod
    def build(cls, fam: LassoFamily) -> "_Padded":
        rows = [(p, c) for p in fam.prefixes for c in fam.cycles]
        L = len(rows)
        n_max = max(len(p) + len(c) for p, c in rows)
        w_max = max(len(p) + 2 * len(c) for p, c in rows)
        codes = np.zeros((L, n_max), np.int64)
        succ = np.tile(np.arange(n_max), (L, 1))
        window = np.zeros((L, w_max), np.int64)
        wlen = np.zeros(L, np.int64)
        for r, (p, c) in enumerate(rows):
            n = len(p) + len(c)
            codes[r, :n] = p + c
            succ[r, : n - 1] = np.arange(1, n)
            succ[r, n - 1] = len(p)
            idx = list(range(n)) + list(range(len(p), n))
            window[r, : len(idx)] = idx
            wlen[r] = len(idx)
        flat = (np.arange(L)[:, None] * n_max + window).T.copy()
        mask = (np.arange(w_max)[:, None] >= wlen[None, :])
        return cls(codes, succ, window, wlen, flat, mask)


def semantic_table(f: Formula, fam: LassoFamily, memo: dict | None = None) -> np.ndarray:
    """``table[i, j]`` is the truth of ``f`` on prefix i followed by cycle j forever.

    ``memo`` may be shared across calls on the same family; only proper
    subformulas are stored in it.
    """
    pad = fam.padded()
    vals = _vec(f, fam.names, pad, {} if memo is None else memo, store=False)[:, 0]
    return vals.reshape(len(fam.prefixes), len(fam.cycles))


def _vec(f: Formula, names, pad: _Padded, memo: dict, store: bool = True) -> np.ndarray:
    if f in memo:
        return memo[f]
    shape = pad.codes.shape
    if isinstance(f, Const):
        out = np.full(shape, f.value)
    elif isinstance(f, Atom):
        out = (pad.codes >> names.index(f.name)) & 1 == 1
    elif isinstance(f, Not):
        out = ~_vec(f.arg, names, pad, memo)
    elif isinstance(f, Next):
        out = np.take_along_axis(_vec(f.arg, names, pad, memo), pad.succ, axis=1)
    elif isinstance(f, And):
        out = _vec(f.left, names, pad, memo) & _vec(f.right, names, pad, memo)
    elif isinstance(f, Or):
        out = _vec(f.left, names, pad, memo) | _vec(f.right, names, pad, memo)
    elif isinstance(f, Implies):
        out = ~_vec(f.left, names, pad, memo) | _vec(f.right, names, pad, memo)
    elif isinstance(f, (Until, Eventually)):
        a = np.ones(shape, bool) if isinstance(f, Eventually) else _vec(f.left, names, pad, memo)
        b = _vec(f.arg if isinstance(f, Eventually) else f.right, names, pad, memo)
        out = _window(a, b, pad, until=True)
    elif isinstance(f, (Release, Always)):
        a = np.zeros(shape, bool) if isinstance(f, Always) else _vec(f.left, names, pad, memo)
        b = _vec(f.arg if isinstance(f, Always) else f.right, names, pad, memo)
        out = _window(a, b, pad, until=False)
    else:
        raise TypeError(f)
    if store:
        memo[f] = out
    return out


def _window(a: np.ndarray, b: np.ndarray, pad: _Padded, until: bool) -> np.ndarray:
    L, n_max = a.shape
    aw = a.ravel()[pad.flat_window]
    bw = b.ravel()[pad.flat_window]
    # past the end of a window the step must pass its successor value through
    if until:
        aw |= pad.pad_mask
        bw &= ~pad.pad_mask
    else:
        aw &= ~pad.pad_mask
        bw |= pad.pad_mask
    out = np.empty((n_max, L), bool)
    nxt = np.full(L, not until)
    for k in range(aw.shape[0] - 1, -1, -1):
        if until:
            nxt = bw[k] | (aw[k] & nxt)
        else:
            nxt = bw[k] & (aw[k] | nxt)
        if k < n_max:
            out[k] = nxt
    return out.T


def _letter_matrices(ba: BuchiAutomaton, names: Sequence[str]) -> np.ndarray:
    index = {q: k for k, q in enumerate(ba.states)}
    Q = len(ba.states)
    mats = np.zeros((1 << len(names), Q, Q), dtype=np.int32)
    for code in range(1 << len(names)):
        letter = frozenset(n for k, n in enumerate(names) if code >> k & 1)
        for e in ba.edges:
            if e.guard.holds(letter):
                mats[code, index[e.src], index[e.dst]] = 1
    return mats


def _bool(x: np.ndarray) -> np.ndarray:
    return (x > 0).astype(np.int32)


def acceptance_table(ba: BuchiAutomaton, fam: LassoFamily) -> np.ndarray:
    """``table[i, j]`` is True iff ``ba`` accepts prefix i followed by cycle j forever.

    For each cycle the one-lap transfer relation and its "passes an accepting
    state" variant are composed from per-letter matrices; a lasso is accepted
    iff a state reachable at a lap boundary lies on a loop of laps that
    includes an accepting visit.
    """
    mats = _letter_matrices(ba, fam.names)
    Q = len(ba.states)
    init = np.array([q in ba.initial for q in ba.states], dtype=np.int32)
    acc = np.array([q in ba.accepting for q in ba.states], dtype=np.int32)

    reach = np.zeros((len(fam.prefixes), Q), dtype=np.int32)
    by_plen: dict[int, list[int]] = {}
    for i, pre in enumerate(fam.prefixes):
        by_plen.setdefault(len(pre), []).append(i)
    for plen, idx in by_plen.items():
        codes = np.array([fam.prefixes[i] for i in idx], dtype=np.int64).reshape(len(idx), plen)
        v = np.broadcast_to(init, (len(idx), Q))
        for t in range(plen):
            v = _bool(np.einsum("lq,lqr->lr", v, mats[codes[:, t]]))
        reach[idx] = v

    closures = np.zeros((len(fam.cycles), Q, Q), dtype=np.int32)
    on_loop = np.zeros((len(fam.cycles), Q), dtype=bool)
    eye = np.eye(Q, dtype=np.int32)
    by_len: dict[int, list[int]] = {}
    for j, cyc in enumerate(fam.cycles):
        by_len.setdefault(len(cyc), []).append(j)
    for clen, js in by_len.items():
        codes = np.array([fam.cycles[j] for j in js])
        path = np.broadcast_to(eye, (len(js), Q, Q)).copy()
        path_acc = np.zeros_like(path)
        for t in range(clen):
            step = mats[codes[:, t]]
            path_acc = _bool((path_acc + path * acc[None, None, :]) @ step)
            path = _bool(path @ step)
        closure = _bool(eye + path)
        span = 1
        while span < Q:
            closure = _bool(closure @ closure)
            span *= 2
        loop = closure @ path_acc @ closure
        closures[js] = closure
        on_loop[js] = np.einsum("lqq->lq", loop) > 0
    at_boundary = np.einsum("pq,cqr->pcr", reach, closures) > 0
    return np.any(at_boundary & on_loop[None, :, :], axis=2)


def _automaton_key(ba: BuchiAutomaton) -> tuple:
    return (len(ba.states), ba.initial, ba.accepting, ba.edges)


@dataclass
class SweepResult:
    formulas: int
    lassos: int
    checks: int
    mismatches: int
    examples: list[tuple[Formula, UltimatelyPeriodicWord]]


def oracle_sweep(formulas: Iterable[Formula], fam: LassoFamily, max_reported: int = 20) -> SweepResult:
    """Compare automaton acceptance against semantic evaluation on every (f, w) pair."""
    examples: list = []
    mismatches = 0
    nf = 0
    automata: dict[Formula, tuple] = {}
    tables: dict[tuple, np.ndarray] = {}
    memo: dict = {}
    for f in formulas:
        nf += 1
        nnf = normalize(f)
        if nnf not in automata:
            ba = translate(nnf, fam.names)
            key = _automaton_key(ba)
            if key not in tables:
                tables[key] = acceptance_table(ba, fam)
            automata[nnf] = key
        diff = np.argwhere(semantic_table(f, fam, memo) != tables[automata[nnf]])
        mismatches += len(diff)
        for i, j in diff[: max(0, max_reported - len(examples))]:
            examples.append((f, fam.word(i, j)))
    return SweepResult(nf, len(fam), nf * len(fam), mismatches, examples)


def scalar_agreement(f: Formula, w: UltimatelyPeriodicWord, names: Sequence[str] | None = None) -> bool:
    """Single-pair check used to cross-validate the batched paths."""
    return accepts_lasso(translate(f, names), w) == eval_word(f, w)
