"""Per-agent discrete planning: transition system, product with the Buchi automaton, lasso search."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .buchi import BuchiAutomaton, accepts_lasso, translate
from .ltl import Formula, UltimatelyPeriodicWord, eval_word, parse_formula
from .workspace import AgentSpec, Region, region_of


class PlanningError(ValueError):
    pass


@dataclass(frozen=True)
class TransitionSystem:
    states: tuple[int, ...]
    initial: int
    edges: frozenset[tuple[int, int]]
    atoms: frozenset[str]
    labels: dict[int, frozenset[str]]

    def label(self, s: int) -> frozenset[str]:
        return self.labels.get(s, frozenset())

    def successors(self, s: int) -> list[int]:
        return [t for t in self.states if (s, t) in self.edges]

    def __hash__(self):
        return hash((self.states, self.initial, self.edges))


@dataclass(frozen=True)
class Plan:
    prefix: tuple[int, ...]
    suffix: tuple[int, ...]

    def __post_init__(self):
        if not self.suffix:
            raise ValueError("plan suffix must be nonempty")

    @property
    def first(self) -> int:
        return (self.prefix or self.suffix)[0]

    def unroll(self, cycles: int) -> list[int]:
        return list(self.prefix) + list(self.suffix) * cycles

    def __str__(self) -> str:
        pre = " ".join(f"pi{k}" for k in self.prefix)
        suf = " ".join(f"pi{k}" for k in self.suffix)
        return f"{pre} | {suf}" if pre else f"| {suf}"

    def to_json(self) -> dict:
        return {"prefix": list(self.prefix), "suffix": list(self.suffix)}


def initial_region(regions: Sequence[Region], agent: AgentSpec) -> int:
    reg = region_of(agent.start, agent.radius, regions)
    if reg is None:
        raise PlanningError(
            f"agent {agent.id} starts at {list(agent.start)}, which is not inside any region "
            "(its ball must be contained in a region ball)"
        )
    return reg.id


def build_ts(regions: Sequence[Region], agent: AgentSpec) -> TransitionSystem:
    """Complete transition system over all regions, self-loops included."""
    init = initial_region(regions, agent)
    ids = tuple(sorted(r.id for r in regions))
    edges = frozenset((a, b) for a in ids for b in ids)
    labels = {k: agent.label(k) for k in ids}
    return TransitionSystem(ids, init, edges, agent.atoms, labels)


@dataclass(frozen=True)
class ProductAutomaton:
    """Product of a transition system and a Buchi automaton.

    A state ``(region, q)`` means the agent is in ``region`` and the automaton
    is in ``q`` after reading that region's label.
    """

    ts: TransitionSystem
    buchi: BuchiAutomaton
    initial: tuple[tuple[int, int], ...]
    succ: dict
    accepting: frozenset[tuple[int, int]]

    @property
    def states(self) -> list[tuple[int, int]]:
        return sorted(self.succ)

    def __hash__(self):
        return hash((self.ts, self.initial, self.accepting))


def product(ts: TransitionSystem, b: BuchiAutomaton) -> ProductAutomaton:
    if not b.alphabet <= ts.atoms:
        missing = sorted(b.alphabet - ts.atoms)
        raise PlanningError(f"automaton uses atoms not known to the transition system: {missing}")

    def step(q: int, region: int) -> list[int]:
        return sorted(b.successors(q, ts.label(region)))

    initial = sorted({(ts.initial, q) for q0 in b.initial for q in step(q0, ts.initial)})
    succ: dict[tuple[int, int], list[tuple[int, int]]] = {}
    todo = list(initial)
    while todo:
        s = todo.pop()
        if s in succ:
            continue
        region, q = s
        out = sorted({(r2, q2) for r2 in ts.successors(region) for q2 in step(q, r2)})
        succ[s] = out
        todo.extend(t for t in out if t not in succ)
    accepting = frozenset(s for s in succ if s[1] in b.accepting)
    return ProductAutomaton(ts, b, tuple(initial), succ, accepting)


def _nested_dfs(pa: ProductAutomaton):
    """Iterative nested depth-first search; returns (stem, cycle) of product states or None."""
    visited_outer: set = set()
    visited_inner: set = set()
    for root in pa.initial:
        if root in visited_outer:
            continue
        visited_outer.add(root)
        path = [root]
        iters = [iter(pa.succ[root])]
        while iters:
            advanced = False
            for t in iters[-1]:
                if t not in visited_outer:
                    visited_outer.add(t)
                    path.append(t)
                    iters.append(iter(pa.succ[t]))
                    advanced = True
                    break
            if advanced:
                continue
            s = path[-1]
            if s in pa.accepting:
                cycle = _inner_dfs(pa, s, visited_inner)
                if cycle is not None:
                    return path[:-1], cycle
            path.pop()
            iters.pop()
    return None


def _inner_dfs(pa: ProductAutomaton, seed, visited: set):
    path = [seed]
    iters = [iter(pa.succ[seed])]
    while iters:
        advanced = False
        for t in iters[-1]:
            if t == seed:
                return path
            if t not in visited:
                visited.add(t)
                path.append(t)
                iters.append(iter(pa.succ[t]))
                advanced = True
                break
        if not advanced:
            path.pop()
            iters.pop()
    return None


def find_lasso(pa: ProductAutomaton) -> Plan | None:
    found = _nested_dfs(pa)
    if found is None:
        return None
    stem, cycle = found
    return Plan(tuple(s[0] for s in stem), tuple(s[0] for s in cycle))


def plan_to_word(plan: Plan, labels: dict[int, frozenset[str]]) -> UltimatelyPeriodicWord:
    def lab(k):
        return frozenset(labels.get(k, frozenset()))

    return UltimatelyPeriodicWord(tuple(lab(k) for k in plan.prefix), tuple(lab(k) for k in plan.suffix))


@dataclass(frozen=True)
class PlanCheck:
    starts_at_initial: bool
    connected: bool
    eval_word: bool
    accepts_lasso: bool

    @property
    def ok(self) -> bool:
        return self.starts_at_initial and self.connected and self.eval_word and self.accepts_lasso

    @property
    def satisfies(self) -> bool:
        return self.eval_word and self.accepts_lasso


def verify_plan(
    plan: Plan,
    ts: TransitionSystem,
    formula: Formula,
    automaton: BuchiAutomaton | None = None,
) -> PlanCheck:
    word = plan_to_word(plan, ts.labels)
    b = automaton if automaton is not None else translate(formula, ts.atoms)
    seq = list(plan.prefix) + list(plan.suffix) + [plan.suffix[0]]
    connected = all(k in ts.states for k in seq) and all(
        (a, c) in ts.edges for a, c in zip(seq, seq[1:])
    )
    return PlanCheck(plan.first == ts.initial, connected, eval_word(formula, word), accepts_lasso(b, word))


@dataclass(frozen=True)
class AgentPlan:
    agent: int
    formula: Formula
    ts: TransitionSystem
    automaton: BuchiAutomaton
    plan: Plan | None

    @property
    def satisfiable(self) -> bool:
        return self.plan is not None


def plan_agent(regions: Sequence[Region], agent: AgentSpec) -> AgentPlan:
    ts = build_ts(regions, agent)
    f = parse_formula(agent.formula, ts.atoms)
    b = translate(f, ts.atoms)
    plan = find_lasso(product(ts, b))
    if plan is not None:
        check = verify_plan(plan, ts, f, b)
        if not check.ok:  # would be a translator or search bug
            raise AssertionError(f"agent {agent.id}: synthesized plan {plan} failed verification: {check}")
    return AgentPlan(agent.id, f, ts, b, plan)
