"""Minimal SVG rendering of workspaces and trajectory CSV files."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .workspace import Scenario

PROJECTIONS = ("xy", "xz", "yz", "iso")
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


@dataclass(frozen=True)
class PlotSpec:
    trajectory: Path | None
    output: Path
    projection: str = "xy"
    draw_regions: bool = True
    draw_agents: bool = True
    draw_plan: bool = False
    size: int = 640
    max_points: int = 4000

    def __post_init__(self):
        if self.projection not in PROJECTIONS:
            raise ValueError(f"unknown projection {self.projection!r}; choose from {', '.join(PROJECTIONS)}")


def _project(points: np.ndarray, projection: str) -> np.ndarray:
    pts = np.asarray(points, float)
    if pts.shape[-1] == 2:
        pts = np.concatenate([pts, np.zeros(pts.shape[:-1] + (1,))], axis=-1)
    if projection == "xy":
        return pts[..., [0, 1]]
    if projection == "xz":
        return pts[..., [0, 2]]
    if projection == "yz":
        return pts[..., [1, 2]]
    # orthographic view from the (1, 1, 1) direction
    ex = np.array([1.0, -1.0, 0.0]) / math.sqrt(2)
    ey = np.array([-1.0, -1.0, 2.0]) / math.sqrt(6)
    return np.stack([pts @ ex, pts @ ey], axis=-1)


def read_trajectory(path: str | Path) -> dict[int, dict]:
    """Parse a trajectory CSV into ``{agent: {"t", "p", "edges"}}``."""
    out: dict[int, dict] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"t", "agent", "x", "y", "z"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ValueError(f"{path}: not a trajectory file (missing columns)")
        for row in reader:
            aid = int(row["agent"])
            rec = out.setdefault(aid, {"t": [], "p": [], "edges": []})
            rec["t"].append(float(row["t"]))
            p = [float(row["x"]), float(row["y"])]
            if row["z"] not in ("", None):
                p.append(float(row["z"]))
            rec["p"].append(p)
            if row.get("edge_src") not in ("", None):
                rec["edges"].append((int(row["edge_src"]), int(row["edge_dst"])))
    for rec in out.values():
        rec["t"] = np.array(rec["t"])
        rec["p"] = np.array(rec["p"])
    return out


def render_svg(scenario: Scenario, spec: PlotSpec) -> str:
    traj = read_trajectory(spec.trajectory) if spec.trajectory is not None else {}
    proj = spec.projection
    ws = scenario.workspace
    c0 = _project(np.array(ws.center), proj)
    half = ws.radius * 1.05
    lo, hi = c0 - half, c0 + half
    S = spec.size

    def tx(q):
        q = np.asarray(q, float)
        x = (q[..., 0] - lo[0]) / (hi[0] - lo[0]) * S
        y = S - (q[..., 1] - lo[1]) / (hi[1] - lo[1]) * S
        return x, y

    scale = S / (hi[0] - lo[0])
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{S}" height="{S}" viewBox="0 0 {S} {S}">',
        f'<rect x="0" y="0" width="{S}" height="{S}" fill="white"/>',
    ]
    x, y = tx(c0)
    parts.append(f'<circle class="workspace" cx="{x:.2f}" cy="{y:.2f}" r="{ws.radius * scale:.2f}" '
                 'fill="none" stroke="black" stroke-width="1.5"/>')
    centers = {}
    if spec.draw_regions:
        for reg in scenario.regions:
            q = _project(np.array(reg.center), proj)
            x, y = tx(q)
            centers[reg.id] = (x, y)
            parts.append(f'<circle class="region" cx="{x:.2f}" cy="{y:.2f}" r="{reg.radius * scale:.2f}" '
                         'fill="#eeeeee" stroke="#555555"/>')
            parts.append(f'<text class="region-label" x="{x:.2f}" y="{y:.2f}" font-size="12" '
                         f'text-anchor="middle" dominant-baseline="middle">{escape("pi" + str(reg.id))}</text>')
    radii = {a.id: a.radius for a in scenario.agents}
    for n, aid in enumerate(sorted(traj)):
        rec = traj[aid]
        color = _COLORS[n % len(_COLORS)]
        pts = _project(rec["p"], proj)
        if len(pts) > spec.max_points:
            idx = np.unique(np.linspace(0, len(pts) - 1, spec.max_points).round().astype(int))
            pts = pts[idx]
        xs, ys = tx(pts)
        coords = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, ys))
        parts.append(f'<polyline class="trajectory" data-agent="{aid}" points="{coords}" '
                     f'fill="none" stroke="{color}" stroke-width="1.2"/>')
        if spec.draw_agents and len(pts):
            r = radii.get(aid, 0.0) * scale
            parts.append(f'<circle class="agent" data-agent="{aid}" cx="{xs[-1]:.2f}" cy="{ys[-1]:.2f}" '
                         f'r="{r:.2f}" fill="none" stroke="{color}" stroke-dasharray="3,2"/>')
        if spec.draw_plan and centers:
            seen = []
            for e in rec["edges"]:
                if e[0] != e[1] and e not in seen and e[0] in centers and e[1] in centers:
                    seen.append(e)
            for a, b in seen:
                (x1, y1), (x2, y2) = centers[a], centers[b]
                parts.append(f'<line class="plan-edge" x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
                             f'stroke="{color}" stroke-opacity="0.4" stroke-dasharray="6,4"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(scenario: Scenario, spec: PlotSpec) -> Path:
    spec.output.write_text(render_svg(scenario, spec))
    return spec.output
