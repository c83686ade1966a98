"""Spherical workspace, regions of interest, agent specifications and scenario files."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

SCHEMA_VERSION = 1


class GeometryError(ValueError):
    """Malformed geometry: non-positive radii, wrong dimension, regions leaving W."""

    def __init__(self, message: str, report: "ValidationReport | None" = None):
        super().__init__(message)
        self.report = report


class StrictValidationError(ValueError):
    def __init__(self, report: "ValidationReport"):
        failed = ", ".join(c.name for c in report.failures)
        super().__init__(f"well-posedness conditions violated: {failed}")
        self.report = report


class ScenarioError(ValueError):
    """The scenario document is missing fields or has values of the wrong type."""


Vector = tuple[float, ...]


def _vec(values: Iterable[float], dim: int, what: str) -> Vector:
    try:
        out = tuple(float(v) for v in values)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{what}: expected a list of numbers") from exc
    if len(out) != dim:
        raise GeometryError(f"{what}: expected {dim} coordinates, got {len(out)}")
    if not all(math.isfinite(v) for v in out):
        raise GeometryError(f"{what}: coordinates must be finite")
    return out


@dataclass(frozen=True)
class Workspace:
    dim: int
    center: Vector
    radius: float

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise GeometryError(f"workspace dimension must be 2 or 3, got {self.dim}")
        if len(self.center) != self.dim:
            raise GeometryError("workspace center has the wrong dimension")
        if not self.radius > 0:
            raise GeometryError(f"workspace radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class Region:
    id: int
    center: Vector
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError(f"region {self.id}: radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class Gains:
    kg: float = 1.0
    lam: float = 2.0
    # weight on G*alpha in the denominator; 1 gives the plain field
    kappa: float = 1.0

    def __post_init__(self):
        for name in ("kg", "lam", "kappa"):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"gain {name} must be positive")


@dataclass(frozen=True)
class FTermParams:
    enabled: bool = True
    eps0: float = 0.1
    X: float | None = None  # None: derived from the sensing plateau

    def __post_init__(self):
        if self.eps0 < 0:
            raise ScenarioError("fterm eps0 must be nonnegative")
        if self.X is not None and not self.X > 0:
            raise ScenarioError("fterm X must be positive")


@dataclass(frozen=True)
class AgentSpec:
    id: int
    radius: float
    sensing: float
    start: Vector
    formula: str
    labels: dict[int, frozenset[str]]
    gains: Gains = field(default_factory=Gains)
    fterm: FTermParams = field(default_factory=FTermParams)
    props: frozenset[str] | None = None
    plan: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError(f"agent {self.id}: radius must be positive")
        if not self.sensing > 0:
            raise GeometryError(f"agent {self.id}: sensing range must be positive")

    @property
    def atoms(self) -> frozenset[str]:
        if self.props is not None:
            return self.props
        out: set[str] = set()
        for names in self.labels.values():
            out |= names
        return frozenset(out)

    def label(self, region_id: int) -> frozenset[str]:
        return self.labels.get(region_id, frozenset())

    def __hash__(self):
        return hash((self.id, self.start, self.formula))


@dataclass(frozen=True)
class SimSettings:
    dt: float = 0.01
    max_cycles: int = 2
    dwell: float = 0.0
    clamp: float | None = None
    max_steps: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ScenarioError("sim.dt must be positive")
        if self.max_cycles < 1:
            raise ScenarioError("sim.max_cycles must be at least 1")
        if self.dwell < 0:
            raise ScenarioError("sim.dwell must be nonnegative")
        if self.clamp is not None and not self.clamp > 0:
            raise ScenarioError("sim.clamp must be positive when given")
        if self.max_steps < 1:
            raise ScenarioError("sim.max_steps must be positive")


@dataclass(frozen=True)
class Scenario:
    workspace: Workspace
    regions: tuple[Region, ...]
    agents: tuple[AgentSpec, ...]
    sim: SimSettings = field(default_factory=SimSettings)
    name: str = ""
    source: str | None = None
    schema_version: int = SCHEMA_VERSION

    def region(self, rid: int) -> Region:
        for r in self.regions:
            if r.id == rid:
                return r
        raise KeyError(rid)

    @property
    def region_ids(self) -> tuple[int, ...]:
        return tuple(r.id for r in self.regions)

    def agent(self, aid: int) -> AgentSpec:
        for a in self.agents:
            if a.id == aid:
                return a
        raise KeyError(aid)

    def validate(self, strict: bool = False) -> "ValidationReport":
        return validate(self.workspace, self.regions, self.agents, strict=strict)


# ---------------------------------------------------------------------------
# geometry predicates


def _dist(a: Sequence[float], b: Sequence[float]) -> float:
    return float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))


def in_region(p_i: Sequence[float], r_i: float, reg: Region) -> bool:
    """Closed containment of the agent ball in the region ball."""
    return _dist(p_i, reg.center) <= reg.radius - r_i


def spheres_disjoint(c1: Sequence[float], r1: float, c2: Sequence[float], r2: float) -> bool:
    """Touching balls count as intersecting."""
    return _dist(c1, c2) > r1 + r2


def region_of(p_i: Sequence[float], r_i: float, regions: Iterable[Region]) -> Region | None:
    for reg in regions:
        if in_region(p_i, r_i, reg):
            return reg
    return None


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    margin: float
    detail: str = ""

    def to_json(self) -> dict:
        return {"name": self.name, "passed": self.passed, "margin": self.margin, "detail": self.detail}


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[Check, ...]
    strict: bool = False

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def warnings(self) -> list[str]:
        return [f"{c.name}: {c.detail}" for c in self.failures]

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"ok": self.ok, "strict": self.strict, "checks": [c.to_json() for c in self.checks]}


def validate(
    w: Workspace,
    regions: Sequence[Region],
    agents: Sequence[AgentSpec] = (),
    strict: bool = False,
) -> ValidationReport:
    """Check the well-posedness conditions of a scenario.

    Containment of regions and agents in the workspace is a hard requirement and
    raises :class:`GeometryError`.  The separation and sizing conditions are
    reported with their margins; in strict mode a failing one raises
    :class:`StrictValidationError`.
    """
    hard: list[str] = []
    checks: list[Check] = []
    ids = [r.id for r in regions]
    if len(set(ids)) != len(ids):
        raise GeometryError("duplicate region ids")
    if len({a.id for a in agents}) != len(agents):
        raise GeometryError("duplicate agent ids")
    for r in regions:
        if len(r.center) != w.dim:
            raise GeometryError(f"region {r.id}: center has the wrong dimension")
    for a in agents:
        if len(a.start) != w.dim:
            raise GeometryError(f"agent {a.id}: start has the wrong dimension")

    for r in regions:
        margin = w.radius - (_dist(r.center, w.center) + r.radius)
        checks.append(Check(f"region_in_workspace[{r.id}]", margin >= 0, margin,
                            f"||p_pi - p0|| + r_pi <= r0 (margin {margin:.6g})"))
        if margin < 0:
            hard.append(f"region {r.id} is not contained in the workspace (margin {margin:.6g})")

    if regions:
        rmax = max(r.radius for r in regions)
        for i, r1 in enumerate(regions):
            for r2 in regions[i + 1:]:
                d = _dist(r1.center, r2.center)
                margin = d - 4 * rmax
                checks.append(Check(f"separation[{r1.id},{r2.id}]", margin > 0, margin,
                                    f"d = {d:.6g} vs 4*max r_pi = {4 * rmax:.6g}"))
        for r in regions:
            d = _dist(r.center, w.center)
            margin = (w.radius - 3 * r.radius) - d
            checks.append(Check(f"boundary[{r.id}]", margin > 0, margin,
                                f"d(p_pi, p0) = {d:.6g} vs r0 - 3 r_pi = {w.radius - 3 * r.radius:.6g}"))

    for a in agents:
        margin = w.radius - (_dist(a.start, w.center) + a.radius)
        if margin < 0:
            hard.append(f"agent {a.id} starts outside the workspace (margin {margin:.6g})")
        if regions:
            rmin = min(r.radius for r in regions)
            m = rmin - a.radius
            checks.append(Check(f"agent_smaller_than_regions[{a.id}]", m > 0, m,
                                f"r_i = {a.radius:.6g} vs min r_pi = {rmin:.6g}"))
        if len(agents) > 1:
            need = max(a.radius + b.radius for b in agents if b.id != a.id)
            m = a.sensing - need
            checks.append(Check(f"sensing_range[{a.id}]", m > 0, m,
                                f"d_s = {a.sensing:.6g} vs max (r_i + r_j) = {need:.6g}"))

    report = ValidationReport(tuple(checks), strict)
    if hard:
        raise GeometryError("; ".join(hard), report)
    if strict and not report.ok:
        raise StrictValidationError(report)
    return report


# ---------------------------------------------------------------------------
# scenario documents


def _req(doc: dict, key: str, where: str) -> Any:
    if not isinstance(doc, dict) or key not in doc:
        raise ScenarioError(f"{where}: missing field {key!r}")
    return doc[key]


def _agent_from_dict(doc: dict, dim: int) -> AgentSpec:
    aid = int(_req(doc, "id", "agent"))
    where = f"agent {aid}"
    labels_doc = doc.get("labels", {})
    if not isinstance(labels_doc, dict):
        raise ScenarioError(f"{where}: labels must be an object")
    labels = {}
    for key, names in labels_doc.items():
        if isinstance(names, str) or not all(isinstance(n, str) and n for n in names):
            raise ScenarioError(f"{where}: labels must map region ids to lists of atom names")
        labels[int(key)] = frozenset(names)
    g = doc.get("gains", {})
    gains = Gains(
        kg=float(g.get("kg", 1.0)),
        lam=float(g.get("lambda", 2.0)),
        kappa=float(g.get("kappa", 1.0)),
    )
    ft = doc.get("fterm", {})
    fterm = FTermParams(
        enabled=bool(ft.get("enabled", True)),
        eps0=float(ft.get("eps0", 0.1)),
        X=None if ft.get("X") is None else float(ft["X"]),
    )
    plan = None
    if doc.get("plan") is not None:
        p = doc["plan"]
        plan = (tuple(int(x) for x in p.get("prefix", [])), tuple(int(x) for x in _req(p, "suffix", where)))
        if not plan[1]:
            raise ScenarioError(f"{where}: plan suffix must be nonempty")
    props = doc.get("props")
    formula = _req(doc, "formula", where)
    if not isinstance(formula, str):
        raise ScenarioError(f"{where}: formula must be a string")
    return AgentSpec(
        id=aid,
        radius=float(_req(doc, "radius", where)),
        sensing=float(_req(doc, "sensing", where)),
        start=_vec(_req(doc, "start", where), dim, f"{where} start"),
        formula=formula,
        labels=labels,
        gains=gains,
        fterm=fterm,
        props=None if props is None else frozenset(props),
        plan=plan,
    )


def scenario_from_dict(doc: dict, source: str | None = None) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    wd = _req(doc, "workspace", "scenario")
    dim = int(_req(wd, "dim", "workspace"))
    if dim not in (2, 3):
        raise GeometryError(f"workspace dimension must be 2 or 3, got {dim}")
    ws = Workspace(dim, _vec(_req(wd, "center", "workspace"), dim, "workspace center"),
                   float(_req(wd, "radius", "workspace")))
    regions = tuple(
        Region(int(_req(r, "id", "region")), _vec(_req(r, "center", "region"), dim, f"region {r.get('id')} center"),
               float(_req(r, "radius", "region")))
        for r in _req(doc, "regions", "scenario")
    )
    agents = tuple(_agent_from_dict(a, dim) for a in _req(doc, "agents", "scenario"))
    sd = doc.get("sim", {})
    sim = SimSettings(
        dt=float(sd.get("dt", 0.01)),
        max_cycles=int(sd.get("max_cycles", 2)),
        dwell=float(sd.get("dwell", 0.0)),
        clamp=None if sd.get("clamp") is None else float(sd["clamp"]),
        max_steps=int(sd.get("max_steps", 1_000_000)),
        seed=int(sd.get("seed", 0)),
    )
    return Scenario(ws, regions, agents, sim, name=str(doc.get("name", "")), source=source,
                    schema_version=int(doc.get("schema_version", SCHEMA_VERSION)))


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    try:
        return scenario_from_dict(doc, source=str(path))
    except (KeyError, TypeError, AttributeError) as exc:
        raise ScenarioError(f"{path}: malformed scenario ({exc})") from exc


def scenario_to_dict(sc: Scenario) -> dict:
    def agent(a: AgentSpec) -> dict:
        d = {
            "id": a.id,
            "radius": a.radius,
            "sensing": a.sensing,
            "start": list(a.start),
            "formula": a.formula,
            "labels": {str(k): sorted(v) for k, v in sorted(a.labels.items())},
            "gains": {"kg": a.gains.kg, "lambda": a.gains.lam, "kappa": a.gains.kappa},
            "fterm": {"enabled": a.fterm.enabled, "eps0": a.fterm.eps0, "X": a.fterm.X},
        }
        if a.props is not None:
            d["props"] = sorted(a.props)
        if a.plan is not None:
            d["plan"] = {"prefix": list(a.plan[0]), "suffix": list(a.plan[1])}
        return d

    return {
        "schema_version": sc.schema_version,
        "name": sc.name,
        "workspace": {"dim": sc.workspace.dim, "center": list(sc.workspace.center), "radius": sc.workspace.radius},
        "regions": [{"id": r.id, "center": list(r.center), "radius": r.radius} for r in sc.regions],
        "agents": [agent(a) for a in sc.agents],
        "sim": {
            "dt": sc.sim.dt,
            "max_cycles": sc.sim.max_cycles,
            "dwell": sc.sim.dwell,
            "clamp": sc.sim.clamp,
            "max_steps": sc.sim.max_steps,
            "seed": sc.sim.seed,
        },
    }


def fixture_path(name: str) -> Path:
    """Path of a bundled scenario, e.g. ``fixture_path("sphere3d")``."""
    here = Path(__file__).resolve().parent / "fixtures"
    p = here / (name if name.endswith(".json") else name + ".json")
    if not p.exists():
        raise FileNotFoundError(p)
    return p


def load_fixture(name: str) -> Scenario:
    return load_scenario(fixture_path(name))
