"""Scenario builders and free-space samplers for the tests."""
from __future__ import annotations

import math

import numpy as np

from ltlnav.navfield import undesired_regions
from ltlnav.workspace import AgentSpec, FTermParams, Gains, Region, Scenario, SimSettings, Workspace


def make_scenario(r0, centers, starts, radius=0.3, sensing=0.65, r_pi=0.4, kg=1.0, lam=2.0, kappa=1.0,
                  formula="true", labels=None, f_enabled=True, sim=None):
    dim = len(centers[0])
    regions = tuple(Region(k + 1, tuple(map(float, c)), r_pi) for k, c in enumerate(centers))
    agents = tuple(
        AgentSpec(i + 1, radius, sensing, tuple(map(float, s)), formula, dict(labels or {}),
                  Gains(kg, lam, kappa), FTermParams(enabled=f_enabled))
        for i, s in enumerate(starts)
    )
    return Scenario(Workspace(dim, (0.0,) * dim, float(r0)), regions, agents, sim or SimSettings())


def random_ball(rng, center, radius, dim):
    while True:
        x = rng.uniform(-1, 1, dim)
        if x @ x <= 1:
            return np.asarray(center, float) + radius * x


def clearance_to_zero_set(sc: Scenario, i: int, source, target, positions) -> float:
    """Distance from agent i's position to the nearest point where G*alpha vanishes."""
    a = sc.agents[i]
    p = positions[i]
    ws = sc.workspace
    d = ws.radius - a.radius - float(np.linalg.norm(p - np.asarray(ws.center)))
    for r in undesired_regions(sc.regions, source, target):
        d = min(d, float(np.linalg.norm(p - np.asarray(r.center))) - (a.radius + r.radius))
    for j, b in enumerate(sc.agents):
        if j != i:
            d = min(d, float(np.linalg.norm(p - positions[j])) - (a.radius + b.radius))
    return d


def sample_free(sc: Scenario, rng, i: int, source, target, margin: float = 0.0):
    """Positions of all agents with agent i strictly inside the (source, target) free space
    and every pair of agents collision free."""
    ws = sc.workspace
    n = len(sc.agents)
    for _ in range(100000):
        pos = np.array([random_ball(rng, ws.center, ws.radius - sc.agents[j].radius, ws.dim) for j in range(n)])
        ok = True
        for j in range(n):
            for k in range(j + 1, n):
                if np.linalg.norm(pos[j] - pos[k]) <= sc.agents[j].radius + sc.agents[k].radius + margin:
                    ok = False
        if ok and clearance_to_zero_set(sc, i, source, target, pos) > margin:
            return pos
    raise RuntimeError("could not sample a free configuration")


def edges_of(sc: Scenario):
    """Every (source, target) pair plus the source-free fields."""
    ids = [r.id for r in sc.regions]
    out = [(k, kk) for k in ids for kk in ids if k != kk]
    out += [(None, kk) for kk in ids]
    return out


def fd_gradient(fun, p, h=1e-6):
    p = np.asarray(p, float)
    g = np.zeros_like(p)
    for k in range(len(p)):
        e = np.zeros_like(p)
        e[k] = h
        g[k] = (fun(p + e) - fun(p - e)) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-300)
    return float(np.linalg.norm(a - b)) / scale


def isclose(a, b, tol=1e-12):
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)
