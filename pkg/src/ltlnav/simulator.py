"""Continuous-time execution of region plans under the switching navigation law.

All agents share one fixed-step RK4 clock.  Each agent walks its plan edge by
edge: phase ``T1`` follows the edge field until the agent's ball leaves the
source region, ``T2`` blends into the source-free field over ``nu`` seconds,
and the edge ends at the first sample where the agent is inside the target.
Agents keep cycling their suffix until every agent has finished the requested
number of cycles, so nobody parks on a region another agent still needs.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ltl import eval_word, parse_formula
from .navfield import DegenerateFieldError, EdgeField, SwitchClock, edge_field
from .planner import Plan, PlanningError, plan_agent, plan_to_word, verify_plan
from .workspace import AgentSpec, Region, Scenario, in_region, spheres_disjoint

T1, T2, ARRIVED, DWELL = "T1", "T2", "ARRIVED", "DWELL"

CSV_HEADER = ["t", "agent", "x", "y", "z", "ux", "uy", "uz", "edge_src", "edge_dst", "phase"]


# ---------------------------------------------------------------------------
# integrator


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], t: float, x: np.ndarray, dt: float):
    """One classical Runge-Kutta step; returns ``(x_next, k1)``."""
    k1 = f(t, x)
    k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = f(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), k1


# ---------------------------------------------------------------------------
# event predicates


def detect_exit(p_i, r_i: float, source: Region) -> bool:
    """True once the agent's ball no longer meets the source region's ball."""
    return spheres_disjoint(p_i, r_i, source.center, source.radius)


@dataclass(frozen=True)
class Violation:
    kind: str  # "collision" or "region"
    agent: int
    other: int
    clearance: float

    def to_json(self) -> dict:
        return {"kind": self.kind, "agent": self.agent, "other": self.other, "clearance": self.clearance}


def clearances(
    positions: np.ndarray,
    radii: Sequence[float],
    edges: Sequence[tuple[int, int] | None],
    regions: Sequence[Region],
):
    """Minimum pairwise and in-transit-to-undesired-region clearances, with the worst pairs."""
    n = len(positions)
    pair = (math.inf, -1, -1)
    for i in range(n):
        for j in range(i + 1, n):
            c = float(np.linalg.norm(positions[i] - positions[j])) - (radii[i] + radii[j])
            if c < pair[0]:
                pair = (c, i, j)
    reg = (math.inf, -1, -1)
    for i in range(n):
        if edges[i] is None:
            continue
        for r in regions:
            if r.id in edges[i]:
                continue
            c = float(np.linalg.norm(positions[i] - np.asarray(r.center))) - (radii[i] + r.radius)
            if c < reg[0]:
                reg = (c, i, r.id)
    return pair, reg


def check_safety(
    positions,
    radii: Sequence[float],
    edges: Sequence[tuple[int, int] | None],
    regions: Sequence[Region],
    agent_ids: Sequence[int] | None = None,
) -> list[Violation]:
    """All violations at one sample; ``edges[i]`` is ``(src, dst)`` for agents in transit, else None.

    Touching counts as a violation.
    """
    positions = np.asarray(positions, float)
    ids = list(agent_ids) if agent_ids is not None else list(range(len(positions)))
    out = []
    n = len(positions)
    for i in range(n):
        for j in range(i + 1, n):
            c = float(np.linalg.norm(positions[i] - positions[j])) - (radii[i] + radii[j])
            if c <= 0:
                out.append(Violation("collision", ids[i], ids[j], c))
    for i in range(n):
        if edges[i] is None:
            continue
        for r in regions:
            if r.id in edges[i]:
                continue
            c = float(np.linalg.norm(positions[i] - np.asarray(r.center))) - (radii[i] + r.radius)
            if c <= 0:
                out.append(Violation("region", ids[i], r.id, c))
    return out


# ---------------------------------------------------------------------------
# runtime state


@dataclass
class EdgeRecord:
    src: int
    dst: int
    t0: float
    t_exit: float | None = None
    nu: float | None = None
    t_f: float | None = None

    def to_json(self) -> dict:
        d = {"src": self.src, "dst": self.dst, "t0": self.t0, "t_exit": self.t_exit, "nu": self.nu, "t_f": self.t_f}
        if self.t_exit is not None and self.t_f is not None:
            d["exit_before_arrival"] = self.t_exit < self.t_f
            d["nu_below_remaining"] = self.nu < self.t_f - self.t_exit
        return d


@dataclass
class AgentRuntime:
    index: int
    spec: AgentSpec
    plan: Plan
    required: int  # number of edges making up the requested cycles
    cursor: int = 0  # index of the current source in the unrolled plan
    phase: str = ARRIVED
    clock: SwitchClock | None = None
    dwell_until: float = 0.0
    switch_done: bool = False
    realized: list[int] = field(default_factory=list)
    edges: list[EdgeRecord] = field(default_factory=list)
    field_edge: EdgeField | None = None
    field_free: EdgeField | None = None

    def region_at(self, k: int) -> int:
        pre, suf = self.plan.prefix, self.plan.suffix
        if k < len(pre):
            return pre[k]
        return suf[(k - len(pre)) % len(suf)]

    @property
    def source(self) -> int:
        return self.region_at(self.cursor)

    @property
    def target(self) -> int:
        return self.region_at(self.cursor + 1)

    @property
    def in_transit(self) -> bool:
        return self.phase in (T1, T2)

    @property
    def done(self) -> bool:
        return len(self.realized) - 1 >= self.required


@dataclass
class Event:
    t: float
    agent: int
    kind: str
    data: dict

    def to_json(self) -> dict:
        return {"t": self.t, "agent": self.agent, "kind": self.kind, "data": self.data}


@dataclass
class SimResult:
    times: np.ndarray
    positions: np.ndarray  # (steps, N, dim)
    controls: np.ndarray  # (steps, N, dim)
    edges: list[list[tuple[int, int]]]  # per step, per agent
    phases: list[list[str]]
    events: list[Event]
    verdict: dict
    agent_ids: list[int]
    dim: int

    @property
    def ok(self) -> bool:
        return self.verdict["status"] == "completed" and self.verdict["conformant"] and not self.verdict["violations"]

    def trajectory_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for s in range(len(self.times)):
            t = _fmt(self.times[s])
            for i, aid in enumerate(self.agent_ids):
                p = [_fmt(v) for v in self.positions[s, i]]
                u = [_fmt(v) for v in self.controls[s, i]]
                if self.dim == 2:
                    p.append("")
                    u.append("")
                src, dst = self.edges[s][i]
                w.writerow([t, aid, *p, *u, src, dst, self.phases[s][i]])
        return buf.getvalue()

    def events_jsonl(self) -> str:
        return "".join(json.dumps(e.to_json(), sort_keys=True) + "\n" for e in self.events)


def _fmt(v: float) -> str:
    return repr(float(v))


# ---------------------------------------------------------------------------
# simulator


class SimulationError(RuntimeError):
    pass


def resolve_plans(scenario: Scenario) -> dict[int, Plan]:
    """Plan for each agent: the scenario's pinned plan when it verifies, otherwise synthesized."""
    plans = {}
    for a in scenario.agents:
        ap = plan_agent(scenario.regions, a)
        if a.plan is not None:
            pinned = Plan(*a.plan)
            check = verify_plan(pinned, ap.ts, ap.formula, ap.automaton)
            if not check.ok:
                raise PlanningError(f"agent {a.id}: pinned plan {pinned} is invalid ({check})")
            plans[a.id] = pinned
        elif ap.plan is None:
            raise PlanningError(f"agent {a.id}: specification is unsatisfiable on this workspace")
        else:
            plans[a.id] = ap.plan
    return plans


class Simulator:
    def __init__(
        self,
        scenario: Scenario,
        plans: dict[int, Plan] | None = None,
        dt: float | None = None,
        max_cycles: int | None = None,
        clamp: float | None | bool = False,
        max_steps: int | None = None,
        record: bool = True,
    ):
        self.scenario = scenario
        sim = scenario.sim
        self.dt = sim.dt if dt is None else dt
        self.max_cycles = sim.max_cycles if max_cycles is None else max_cycles
        # clamp=False means "use the scenario setting"; None disables explicitly
        self.clamp = sim.clamp if clamp is False else clamp
        self.max_steps = sim.max_steps if max_steps is None else max_steps
        self.dwell = sim.dwell
        self.record = record
        self.regions = {r.id: r for r in scenario.regions}
        self.plans = plans if plans is not None else resolve_plans(scenario)
        self.radii = np.array([a.radius for a in scenario.agents])
        self.dim = scenario.workspace.dim
        self._fields: dict[tuple[int, int | None, int], EdgeField] = {}
        self.t = 0.0
        self.steps = 0
        self.positions = np.array([a.start for a in scenario.agents], float)
        self.events: list[Event] = []
        self.agents: list[AgentRuntime] = []
        for i, a in enumerate(scenario.agents):
            plan = self.plans[a.id]
            rt = AgentRuntime(i, a, plan, required=len(plan.prefix) + len(plan.suffix) * self.max_cycles)
            if not in_region(a.start, a.radius, self.regions[plan.first]):
                raise PlanningError(f"agent {a.id} does not start inside pi{plan.first}")
            rt.realized.append(plan.first)
            self.agents.append(rt)
        self.min_pair = (math.inf, None, None, None)
        self.min_region = (math.inf, None, None, None)
        self.violations: list[Violation] = []
        self.max_abs_u = np.zeros(len(self.agents))
        self._log_t: list[float] = []
        self._log_p: list[np.ndarray] = []
        self._log_u: list[np.ndarray] = []
        self._log_e: list[list[tuple[int, int]]] = []
        self._log_ph: list[list[str]] = []
        for rt in self.agents:
            self._begin_edge(rt, 0.0)

    # -- fields -------------------------------------------------------------

    def _field(self, rt: AgentRuntime, src: int | None, dst: int) -> EdgeField:
        key = (rt.index, src, dst)
        if key not in self._fields:
            sc = self.scenario
            self._fields[key] = edge_field(sc.workspace, sc.regions, rt.spec, src, dst,
                                           all_radii=list(self.radii))
        return self._fields[key]

    def _emit(self, t: float, rt: AgentRuntime, kind: str, **data) -> None:
        self.events.append(Event(t, rt.spec.id, kind, data))

    def _begin_edge(self, rt: AgentRuntime, t: float) -> None:
        src, dst = rt.source, rt.target
        rt.edges.append(EdgeRecord(src, dst, t))
        self._emit(t, rt, "transition_started", src=src, dst=dst)
        if src == dst:
            # staying put is a legal step with zero control
            self._arrive(rt, t)
            return
        rt.phase = T1
        rt.switch_done = False
        rt.clock = SwitchClock(t)
        rt.field_edge = self._field(rt, src, dst)
        rt.field_free = self._field(rt, None, dst)

    def _arrive(self, rt: AgentRuntime, t: float) -> None:
        rec = rt.edges[-1]
        rec.t_f = t
        rt.cursor += 1
        rt.realized.append(rec.dst)
        self._emit(t, rt, "arrived", region=rec.dst, t_f=t - rec.t0)
        rt.phase = ARRIVED
        rt.clock = None
        if self.dwell > 0:
            rt.phase = DWELL
            rt.dwell_until = t + self.dwell

    # -- per-sample bookkeeping --------------------------------------------

    def _update_phases(self) -> None:
        t = self.t
        for rt in self.agents:
            p = self.positions[rt.index]
            if rt.phase == DWELL and t >= rt.dwell_until - 1e-12:
                rt.phase = ARRIVED
            if rt.phase == ARRIVED:
                if self._all_done():
                    continue
                self._begin_edge(rt, t)
                continue
            if rt.phase == T1 and detect_exit(p, rt.spec.radius, self.regions[rt.source]):
                rt.clock.mark_exit(t, self.dt)
                rec = rt.edges[-1]
                rec.t_exit, rec.nu = t - rec.t0, rt.clock.nu
                rt.phase = T2
                self._emit(t, rt, "region_exited", region=rt.source, t_exit=rec.t_exit, nu=rec.nu)
            if rt.phase == T2:
                if not rt.switch_done and t >= rt.clock.t_exit + rt.clock.nu:
                    rt.switch_done = True
                    self._emit(t, rt, "switch_complete")
                if in_region(p, rt.spec.radius, self.regions[rt.target]):
                    self._arrive(rt, t)
                    if rt.phase == ARRIVED and not self._all_done():
                        self._begin_edge(rt, t)

    def _all_done(self) -> bool:
        return all(rt.done for rt in self.agents)

    def _transit_edges(self):
        return [(rt.source, rt.target) if rt.in_transit else None for rt in self.agents]

    def _monitor(self) -> None:
        edges = self._transit_edges()
        (pc, pi, pj), (rc, ri, rk) = clearances(self.positions, self.radii, edges, self.scenario.regions)
        ids = [a.spec.id for a in self.agents]
        if pc < self.min_pair[0]:
            self.min_pair = (pc, self.t, ids[pi], ids[pj])
        if rc < self.min_region[0]:
            self.min_region = (rc, self.t, ids[ri], rk)
        if pc <= 0 or rc <= 0:
            found = check_safety(self.positions, self.radii, edges, self.scenario.regions, ids)
            for v in found:
                self.violations.append(v)
                kind = "collision_violation" if v.kind == "collision" else "region_violation"
                self.events.append(Event(self.t, v.agent, kind, {"other": v.other, "clearance": v.clearance}))

    # -- dynamics -----------------------------------------------------------

    def controls(self, t: float, positions: np.ndarray) -> np.ndarray:
        """Every agent's control at time ``t`` for the given stage positions."""
        n = len(self.agents)
        u = np.zeros_like(positions)
        for rt in self.agents:
            if not rt.in_transit:
                continue
            i = rt.index
            mask = np.arange(n) != i
            others, orad = positions[mask], self.radii[mask]
            kg = rt.spec.gains.kg
            w = rt.clock.weight(t)
            if w <= 0.0:
                u[i] = -kg * rt.field_edge.evaluate(positions[i], others, orad)[1]
            elif w >= 1.0:
                u[i] = -kg * rt.field_free.evaluate(positions[i], others, orad)[1]
            else:
                ge = rt.field_edge.evaluate(positions[i], others, orad)[1]
                gf = rt.field_free.evaluate(positions[i], others, orad)[1]
                u[i] = -kg * ((1.0 - w) * ge + w * gf)
        if self.clamp is not None:
            np.clip(u, -self.clamp, self.clamp, out=u)
        return u

    def step(self) -> np.ndarray:
        """Advance all agents by one ``dt``; returns the controls applied at the start of the step."""
        x, u0 = rk4_step(self.controls, self.t, self.positions, self.dt)
        self.positions = x
        self.steps += 1
        self.t = self.steps * self.dt
        return u0

    def run(self) -> SimResult:
        status, detail = "completed", ""
        try:
            while True:
                self._update_phases()
                self._monitor()
                if self.violations:
                    status, detail = "violation", "safety violation"
                    self._log_sample(self.t, self.positions, np.zeros_like(self.positions))
                    break
                if self._all_done():
                    self._log_sample(self.t, self.positions, np.zeros_like(self.positions))
                    break
                if self.steps >= self.max_steps:
                    status, detail = "incomplete", f"step budget of {self.max_steps} exhausted"
                    self._log_sample(self.t, self.positions, np.zeros_like(self.positions))
                    break
                p_before, t_before = self.positions, self.t
                u0 = self.step()
                # each record pairs a sample with the control applied from it
                self._log_sample(t_before, p_before, u0)
        except DegenerateFieldError as exc:
            status, detail = "degenerate", str(exc)
        return self._result(status, detail)

    def _log_sample(self, t: float, p: np.ndarray, u: np.ndarray) -> None:
        self.max_abs_u = np.maximum(self.max_abs_u, np.abs(u).max(axis=1))
        if not self.record:
            return
        self._log_t.append(t)
        self._log_p.append(p)
        self._log_u.append(u)
        self._log_e.append([(rt.source, rt.target) for rt in self.agents])
        self._log_ph.append([rt.phase for rt in self.agents])

    def _result(self, status: str, detail: str) -> SimResult:
        per_agent = []
        conformant = True
        for rt in self.agents:
            expected = [rt.region_at(k) for k in range(len(rt.realized))]
            matches = rt.realized == expected
            completed = rt.done
            formula = parse_formula(rt.spec.formula, rt.spec.atoms)
            word_ok = eval_word(formula, plan_to_word(rt.plan, rt.spec.labels))
            conformant &= matches and completed and word_ok
            per_agent.append({
                "agent": rt.spec.id,
                "plan": rt.plan.to_json(),
                "realized": rt.realized,
                "required_edges": rt.required,
                "completed": completed,
                "sequence_matches_plan": matches,
                "plan_satisfies_formula": word_ok,
                "max_abs_u": float(self.max_abs_u[rt.index]),
                "edges": [e.to_json() for e in rt.edges],
            })
        verdict = {
            "status": status,
            "detail": detail,
            "t_end": self.t,
            "steps": self.steps,
            "dt": self.dt,
            "max_cycles": self.max_cycles,
            "clamp": self.clamp,
            "clamped": self.clamp is not None,
            "conformant": bool(conformant and status == "completed"),
            "min_pair_clearance": _clear(self.min_pair),
            "min_region_clearance": _clear(self.min_region),
            "max_abs_u": float(self.max_abs_u.max()) if len(self.agents) else 0.0,
            "violations": [v.to_json() for v in self.violations],
            "agents": per_agent,
        }
        if self._log_p:
            positions = np.stack(self._log_p)
            controls = np.stack(self._log_u)
        else:
            positions = np.zeros((0, len(self.agents), self.dim))
            controls = np.zeros((0, len(self.agents), self.dim))
        return SimResult(np.array(self._log_t), positions, controls, self._log_e, self._log_ph,
                         self.events, verdict, [rt.spec.id for rt in self.agents], self.dim)


def _clear(entry) -> dict:
    c, t, a, b = entry
    return {"value": float(c) if math.isfinite(c) else None, "t": None if t is None else float(t), "a": a, "b": b}


def run(scenario: Scenario, **kwargs) -> SimResult:
    return Simulator(scenario, **kwargs).run()
