"""Command-line front end: ``ltlnav check|translate|plan|simulate|plot``.

Exit codes: 0 ok, 1 input or parse error, 2 strict validation failure,
3 unsatisfiable specification, 4 simulation unsafe or incomplete.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .buchi import translate
from .ltl import FormulaError, parse_formula
from .planner import Plan, PlanningError, plan_agent, verify_plan
from .plot import PROJECTIONS, PlotSpec, write_svg
from .workspace import GeometryError, ScenarioError, StrictValidationError, load_scenario

EXIT_OK, EXIT_INPUT, EXIT_STRICT, EXIT_UNSAT, EXIT_SIM = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which is reserved for strict validation
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _fail(msg: str, code: int = EXIT_INPUT) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _load(path: str):
    return load_scenario(path)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    try:
        sc = _load(args.config)
        report = sc.validate(strict=args.strict)
    except StrictValidationError as exc:
        for c in exc.report.checks:
            print(f"{'ok  ' if c.passed else 'FAIL'} {c.name}: {c.detail}")
        return _fail(str(exc), EXIT_STRICT)
    except GeometryError as exc:
        return _fail(f"geometry error: {exc}")
    except (OSError, ScenarioError) as exc:
        return _fail(str(exc))
    for c in report.checks:
        print(f"{'ok  ' if c.passed else 'warn'} {c.name}: {c.detail}")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_translate(args) -> int:
    props = None
    if args.props:
        props = [p.strip() for p in args.props.split(",") if p.strip()]
    try:
        f = parse_formula(args.formula, props)
    except FormulaError as exc:
        return _fail(str(exc))
    b = translate(f, props)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "automaton.json").write_text(b.dumps() + "\n")
        (out / "automaton.dot").write_text(b.to_dot())
    if args.format in ("json", "both"):
        print(b.dumps())
    if args.format in ("dot", "both"):
        sys.stdout.write(b.to_dot())
    return EXIT_OK


def cmd_plan(args) -> int:
    try:
        sc = _load(args.config)
        sc.validate(strict=args.strict)
    except StrictValidationError as exc:
        return _fail(str(exc), EXIT_STRICT)
    except (OSError, ScenarioError, GeometryError) as exc:
        return _fail(str(exc))
    docs, lines, unsat = [], [], False
    for a in sc.agents:
        try:
            ap = plan_agent(sc.regions, a)
        except PlanningError as exc:
            return _fail(str(exc))
        except FormulaError as exc:
            return _fail(f"agent {a.id}: {exc}")
        doc = {"agent": a.id, "formula": a.formula, "initial": ap.ts.initial,
               "automaton_states": len(ap.automaton.states)}
        if ap.plan is None:
            unsat = True
            doc["status"] = "UNSAT"
            lines.append(f"agent {a.id}: UNSAT")
        else:
            doc["status"] = "SAT"
            doc["plan"] = ap.plan.to_json()
            lines.append(f"agent {a.id}: {ap.plan}")
        if a.plan is not None:
            pinned = Plan(*a.plan)
            check = verify_plan(pinned, ap.ts, ap.formula, ap.automaton)
            doc["pinned"] = {**pinned.to_json(), "valid": check.ok, **dataclasses.asdict(check)}
            lines.append(f"  pinned {pinned}: {'valid' if check.ok else 'INVALID'}")
        docs.append(doc)
    result = {"scenario": sc.name, "agents": docs}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "plans.json").write_text(_dump(result) + "\n")
    if args.json:
        print(_dump(result))
    else:
        print("\n".join(lines))
    return EXIT_UNSAT if unsat else EXIT_OK


def cmd_simulate(args) -> int:
    from .simulator import SimulationError, Simulator

    try:
        sc = _load(args.config)
        sc.validate(strict=args.strict)
    except StrictValidationError as exc:
        return _fail(str(exc), EXIT_STRICT)
    except (OSError, ScenarioError, GeometryError) as exc:
        return _fail(str(exc))
    kwargs = {}
    if args.dt is not None:
        kwargs["dt"] = args.dt
    if args.cycles is not None:
        kwargs["max_cycles"] = args.cycles
    if args.clamp is not None:
        kwargs["clamp"] = args.clamp
    if args.max_steps is not None:
        kwargs["max_steps"] = args.max_steps
    try:
        sim = Simulator(sc, **kwargs)
    except PlanningError as exc:
        code = EXIT_UNSAT if "unsatisfiable" in str(exc) else EXIT_INPUT
        return _fail(str(exc), code)
    except (FormulaError, ValueError) as exc:
        return _fail(str(exc))
    try:
        result = sim.run()
    except SimulationError as exc:
        return _fail(str(exc), EXIT_SIM)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trajectory.csv").write_text(result.trajectory_csv())
    (out / "events.jsonl").write_text(result.events_jsonl())
    (out / "verdict.json").write_text(_dump(result.verdict) + "\n")
    v = result.verdict
    print(f"status: {v['status']}  conformant: {v['conformant']}  t_end: {v['t_end']:.2f}s")
    print(f"min pair clearance: {v['min_pair_clearance']['value']}")
    print(f"min region clearance: {v['min_region_clearance']['value']}")
    print(f"max |u_m|: {v['max_abs_u']:.4f}" + (f" (clamped at {v['clamp']})" if v["clamped"] else ""))
    return EXIT_OK if result.ok else EXIT_SIM


def cmd_plot(args) -> int:
    if args.projection not in PROJECTIONS:
        return _fail(f"unknown projection {args.projection!r}; choose from {', '.join(PROJECTIONS)}")
    try:
        sc = _load(args.config)
    except (OSError, ScenarioError, GeometryError) as exc:
        return _fail(str(exc))
    traj = Path(args.trajectory) if args.trajectory else None
    if traj is not None and not traj.exists():
        return _fail(f"trajectory file {traj} does not exist")
    spec = PlotSpec(traj, Path(args.out), args.projection, draw_regions=not args.no_regions,
                    draw_agents=not args.no_agents, draw_plan=args.plan_arrows)
    try:
        write_svg(sc, spec)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))
    print(f"wrote {spec.output}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ltlnav", description="LTL planning and navigation-function simulation for spherical agents")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="validate a scenario's geometry")
    c.add_argument("--config", required=True)
    c.add_argument("--strict", action="store_true")
    c.set_defaults(func=cmd_check)

    t = sub.add_parser("translate", help="translate an LTL formula to a Buchi automaton")
    t.add_argument("formula")
    t.add_argument("--props", help="comma-separated atom names (default: atoms of the formula)")
    t.add_argument("--format", choices=("json", "dot", "both"), default="json")
    t.add_argument("--out", help="directory for automaton.json and automaton.dot")
    t.set_defaults(func=cmd_translate)

    pl = sub.add_parser("plan", help="compute each agent's prefix-suffix plan")
    pl.add_argument("--config", required=True)
    pl.add_argument("--out", help="directory for plans.json")
    pl.add_argument("--json", action="store_true", help="print JSON instead of text")
    pl.add_argument("--strict", action="store_true")
    pl.set_defaults(func=cmd_plan)

    s = sub.add_parser("simulate", help="execute the plans in continuous time")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--dt", type=float)
    s.add_argument("--cycles", type=int)
    s.add_argument("--clamp", type=float, help="per-axis control bound in m/s")
    s.add_argument("--max-steps", type=int)
    s.add_argument("--strict", action="store_true")
    s.set_defaults(func=cmd_simulate)

    g = sub.add_parser("plot", help="render a trajectory CSV to SVG")
    g.add_argument("--config", required=True)
    g.add_argument("--trajectory")
    g.add_argument("--out", required=True)
    g.add_argument("--projection", default="xy")
    g.add_argument("--no-regions", action="store_true")
    g.add_argument("--no-agents", action="store_true")
    g.add_argument("--plan-arrows", action="store_true")
    g.set_defaults(func=cmd_plot)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
