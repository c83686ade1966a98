"""Decentralized navigation functions and the switching control law.

For agent ``i`` heading from region ``k`` to region ``k'`` the potential is::

    phi = (gamma + f(G)) / (gamma**lam + kappa * G * alpha) ** (1 / lam)

with ``gamma`` the squared distance to the target center, ``G`` the product of
pairwise neighbour terms ``beta_ij``, and ``alpha`` the product of the workspace
boundary term and one term per undesired region.  ``kappa`` defaults to 1.
The "source-free" field (``source=None``) treats every region except the target
as undesired.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .workspace import AgentSpec, Region, Scenario, Workspace

DENOMINATOR_FLOOR = 1e-12


class DegenerateFieldError(ArithmeticError):
    """The denominator of the navigation function fell below the numerical floor."""


# ---------------------------------------------------------------------------
# scalar building blocks


def gamma(p_i, target_center) -> float:
    d = np.asarray(p_i, float) - np.asarray(target_center, float)
    return float(d @ d)


def beta_ij(p_i, p_j, r_i: float, r_j: float, d_si: float) -> float:
    d = np.asarray(p_i, float) - np.asarray(p_j, float)
    dist2 = float(d @ d)
    if dist2 <= d_si * d_si:
        return dist2 - (r_i + r_j) ** 2
    return d_si * d_si - (r_i + r_j) ** 2


def default_X(sensing: float, radii: Sequence[float]) -> float:
    """A tenth of the collision-term plateau for ``len(radii)`` agents."""
    n = len(radii)
    if n <= 1:
        return 0.1
    rmax = max(radii)
    return 0.1 * (sensing**2 - (2 * rmax) ** 2) ** (n - 1)


def fterm(G: float, eps0: float, X: float) -> float:
    if G >= X:
        return 0.0
    return eps0 * (1.0 - G / X) ** 3


def fterm_prime(G: float, eps0: float, X: float) -> float:
    if G >= X:
        return 0.0
    return -3.0 * eps0 / X * (1.0 - G / X) ** 2


def switch_s(x: float) -> float:
    """Saturated ramp: 0 below 0, 1 above 1, linear between."""
    return 0.5 * (min(max(2.0 * x - 1.0, -1.0), 1.0) + 1.0)


# ---------------------------------------------------------------------------
# the field itself


@dataclass
class EdgeField:
    """Navigation function of one agent for one edge, with geometry pre-packed.

    ``obstacles`` holds the centers of undesired regions and ``obstacle_r2`` the
    squared inflated radii ``(r_i + r_m)**2``.
    """

    target: np.ndarray
    p0: np.ndarray
    a0_r2: float
    obstacles: np.ndarray
    obstacle_r2: np.ndarray
    r_i: float
    sensing: float
    kg: float
    lam: float
    kappa: float = 1.0
    f_enabled: bool = False
    eps0: float = 0.0
    X: float = 1.0

    def _G(self, p: np.ndarray, others: np.ndarray, other_r: np.ndarray):
        if len(others) == 0:
            return 1.0, np.zeros_like(p)
        diff = p - others
        d2 = np.einsum("ij,ij->i", diff, diff)
        rr2 = (self.r_i + other_r) ** 2
        near = d2 <= self.sensing * self.sensing
        beta = np.where(near, d2, self.sensing * self.sensing) - rr2
        dbeta = np.where(near[:, None], 2.0 * diff, 0.0)
        if len(beta) == 1:
            return float(beta[0]), dbeta[0]
        # products leaving one factor out, robust to zero factors
        left = np.concatenate(([1.0], np.cumprod(beta[:-1])))
        right = np.concatenate((np.cumprod(beta[::-1][:-1])[::-1], [1.0]))
        return float(np.prod(beta)), (left * right) @ dbeta

    def _alpha(self, p: np.ndarray):
        dp0 = p - self.p0
        a0 = self.a0_r2 - float(dp0 @ dp0)
        if len(self.obstacles) == 0:
            return a0, -2.0 * dp0
        diff = p - self.obstacles
        am = np.einsum("ij,ij->i", diff, diff) - self.obstacle_r2
        factors = np.concatenate(([a0], am))
        grads = np.vstack((-2.0 * dp0, 2.0 * diff))
        left = np.concatenate(([1.0], np.cumprod(factors[:-1])))
        right = np.concatenate((np.cumprod(factors[::-1][:-1])[::-1], [1.0]))
        return float(np.prod(factors)), (left * right) @ grads

    def parts(self, p, others=(), other_r=()):
        """Raw ingredients ``(gamma, G, alpha)`` at ``p``."""
        p = np.asarray(p, float)
        others = np.asarray(others, float).reshape(-1, len(p))
        G, _ = self._G(p, others, np.asarray(other_r, float))
        a, _ = self._alpha(p)
        dg = p - self.target
        return float(dg @ dg), G, a

    def evaluate(self, p, others=(), other_r=()):
        """Return ``(phi, grad_phi)`` for the agent at ``p`` given neighbour positions."""
        p = np.asarray(p, float)
        others = np.asarray(others, float).reshape(-1, len(p))
        other_r = np.asarray(other_r, float)
        lam = self.lam
        dg = p - self.target
        g = float(dg @ dg)
        grad_g = 2.0 * dg
        G, grad_G = self._G(p, others, other_r)
        a, grad_a = self._alpha(p)
        if self.f_enabled:
            f, fp = fterm(G, self.eps0, self.X), fterm_prime(G, self.eps0, self.X)
        else:
            f, fp = 0.0, 0.0
        num = g + f
        grad_num = grad_g + fp * grad_G
        glam = g**lam
        den = glam + self.kappa * G * a
        if not den > DENOMINATOR_FLOOR:
            raise DegenerateFieldError(f"navigation denominator {den:.3e} below floor at p={p.tolist()}")
        grad_den = self.kappa * (a * grad_G + G * grad_a)
        if g > 0.0:
            grad_den = grad_den + lam * (glam / g) * grad_g
        root = den ** (1.0 / lam)
        phi = num / root
        grad = grad_num / root - (phi / (lam * den)) * grad_den
        return phi, grad

    def phi(self, p, others=(), other_r=()) -> float:
        return self.evaluate(p, others, other_r)[0]

    def grad(self, p, others=(), other_r=()) -> np.ndarray:
        return self.evaluate(p, others, other_r)[1]

    def velocity(self, p, others=(), other_r=()) -> np.ndarray:
        return -self.kg * self.evaluate(p, others, other_r)[1]


def undesired_regions(regions: Sequence[Region], source: int | None, target: int) -> list[Region]:
    """Regions other than the edge's endpoints (only the target for the source-free field)."""
    skip = {target} if source is None else {source, target}
    return [r for r in regions if r.id not in skip]


def edge_field(
    workspace: Workspace,
    regions: Sequence[Region],
    agent: AgentSpec,
    source: int | None,
    target: int,
    n_agents: int = 1,
    all_radii: Sequence[float] | None = None,
    f_enabled: bool | None = None,
) -> EdgeField:
    by_id = {r.id: r for r in regions}
    if target not in by_id:
        raise KeyError(f"unknown target region {target}")
    if source is not None:
        if source not in by_id:
            raise KeyError(f"unknown source region {source}")
        if source == target:
            raise ValueError("source and target coincide; the control is zero on such edges")
    bad = undesired_regions(regions, source, target)
    dim = workspace.dim
    X = agent.fterm.X
    if X is None:
        X = default_X(agent.sensing, all_radii if all_radii is not None else [agent.radius] * n_agents)
    return EdgeField(
        target=np.asarray(by_id[target].center, float),
        p0=np.asarray(workspace.center, float),
        a0_r2=(workspace.radius - agent.radius) ** 2,
        obstacles=np.asarray([r.center for r in bad], float).reshape(-1, dim),
        obstacle_r2=np.asarray([(agent.radius + r.radius) ** 2 for r in bad], float),
        r_i=agent.radius,
        sensing=agent.sensing,
        kg=agent.gains.kg,
        lam=agent.gains.lam,
        kappa=agent.gains.kappa,
        f_enabled=agent.fterm.enabled if f_enabled is None else f_enabled,
        eps0=agent.fterm.eps0,
        X=X,
    )


# ---------------------------------------------------------------------------
# context-level API


@dataclass
class NavContext:
    """Everything agent ``i`` needs to evaluate one of its fields."""

    scenario: Scenario
    agent_index: int
    source: int | None
    target: int
    positions: np.ndarray
    f_enabled: bool | None = None
    _field: EdgeField | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, float)

    @property
    def agent(self) -> AgentSpec:
        return self.scenario.agents[self.agent_index]

    @property
    def p_i(self) -> np.ndarray:
        return self.positions[self.agent_index]

    def neighbours(self):
        idx = [j for j in range(len(self.scenario.agents)) if j != self.agent_index]
        return self.positions[idx], np.array([self.scenario.agents[j].radius for j in idx])

    @property
    def field(self) -> EdgeField:
        if self._field is None:
            sc = self.scenario
            self._field = edge_field(sc.workspace, sc.regions, self.agent, self.source, self.target,
                                     all_radii=[a.radius for a in sc.agents], f_enabled=self.f_enabled)
        return self._field

    def with_positions(self, positions) -> "NavContext":
        ctx = NavContext(self.scenario, self.agent_index, self.source, self.target, positions, self.f_enabled)
        ctx._field = self._field
        return ctx

    def evaluate(self):
        others, radii = self.neighbours()
        return self.field.evaluate(self.p_i, others, radii)


def bigG(ctx: NavContext) -> float:
    """Product of the pairwise neighbour terms (1 for a lone agent)."""
    a = ctx.agent
    out = 1.0
    for j, b in enumerate(ctx.scenario.agents):
        if j != ctx.agent_index:
            out *= beta_ij(ctx.p_i, ctx.positions[j], a.radius, b.radius, a.sensing)
    return out


def alpha_avoid(p_i, ctx: NavContext) -> float:
    return ctx.field._alpha(np.asarray(p_i, float))[0]


def phi(ctx: NavContext) -> float:
    return ctx.evaluate()[0]


def grad_phi(ctx: NavContext) -> np.ndarray:
    return ctx.evaluate()[1]


# ---------------------------------------------------------------------------
# switching law


@dataclass
class SwitchClock:
    t0: float
    t_exit: float | None = None
    nu: float | None = None

    def mark_exit(self, t: float, dt: float) -> None:
        if t < self.t0:
            raise ValueError("exit time precedes the transition start")
        self.t_exit = t
        self.nu = max(0.1 * (t - self.t0), dt)

    def weight(self, t: float) -> float:
        """Blend weight of the source-free field at time ``t``."""
        if self.t_exit is None or t < self.t_exit:
            return 0.0
        return switch_s((t - self.t_exit) / self.nu)


def blend(u_edge: np.ndarray | None, u_free: np.ndarray | None, w: float) -> np.ndarray:
    if w <= 0.0:
        return u_edge
    if w >= 1.0:
        return u_free
    return (1.0 - w) * u_edge + w * u_free


def control(t: float, ctx: NavContext, clock: SwitchClock) -> np.ndarray:
    """Control of agent ``ctx.agent_index`` at time ``t`` on edge ``source -> target``."""
    if ctx.source is None:
        raise ValueError("control needs the edge's source region")
    if t < clock.t0:
        raise ValueError("t precedes the transition start")
    if ctx.source == ctx.target:
        return control_self_loop(ctx.scenario.workspace.dim)
    kg = ctx.agent.gains.kg
    w = clock.weight(t)
    u_edge = None if w >= 1.0 else -kg * ctx.evaluate()[1]
    u_free = None
    if w > 0.0:
        free = NavContext(ctx.scenario, ctx.agent_index, None, ctx.target, ctx.positions, ctx.f_enabled)
        u_free = -kg * free.evaluate()[1]
    return blend(u_edge, u_free, w)


def control_self_loop(dim: int) -> np.ndarray:
    """Zero control when the edge stays inside one region."""
    return np.zeros(dim)
