"""American call and put in forward time-to-maturity, and their free boundaries."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import PayoffKind, SolveGrid, exercise_value, payoff
from .params import ValidatedConfig
from .penalty import PenaltyFn, SmootherFn, phi
from .stepping import PENALTY, PSOR, MarchLog, march
from .tridiag import assemble


class Role(enum.Enum):
    CALL = "call"
    PUT = "put"
    CHOOSER = "chooser"
    OBSTACLE = "obstacle"


class Side(enum.Enum):
    CALL_SIDE = "call"
    PUT_SIDE = "put"


@dataclass(eq=False)
class ValueSurface:
    """Solution values ``values[k, i]`` at ``tau = k*dt``, ``x = x_i``.

    ``obstacle`` has the same shape (possibly a broadcast view) and holds the
    constraint actually enforced by the solver. ``contact_offset`` is how far
    above the raw payoff a node may sit and still count as exercised: zero for
    projected SOR, one ``eps`` per penalized layer for the penalty method.
    """

    role: Role
    values: np.ndarray
    grid: SolveGrid
    horizon: float
    method: str = PSOR
    obstacle: np.ndarray | None = None
    contact_offset: float = 0.0
    eps: float | None = None
    log: MarchLog = field(default_factory=MarchLog)

    @property
    def n_levels(self) -> int:
        return self.values.shape[0]

    @property
    def tau(self) -> np.ndarray:
        return self.grid.tau_nodes[: self.n_levels]

    def clamped(self, floor=None) -> np.ndarray:
        """Values lifted to at least ``floor`` (default: the enforced obstacle)."""
        floor = self.obstacle if floor is None else floor
        return np.maximum(self.values, floor)

    def at(self, level: int, x: float) -> float:
        """Cubic interpolation of one time level at log-price ``x``."""
        return interp_cubic(self.grid.x_nodes, self.values[level], x)

    def price(self, spot: float, level: int | None = None) -> float:
        """Value at spot ``spot``; defaults to the last level (full horizon)."""
        level = self.n_levels - 1 if level is None else level
        return self.at(level, math.log(spot))


def interp_cubic(xs: np.ndarray, ys: np.ndarray, x: float) -> float:
    """Four-point Lagrange interpolation on a uniform grid."""
    h = xs[1] - xs[0]
    i = int(np.floor((x - xs[0]) / h))
    i = min(max(i - 1, 0), xs.size - 4)
    t = (x - xs[i]) / h
    y0, y1, y2, y3 = ys[i : i + 4]
    w0 = -(t - 1) * (t - 2) * (t - 3) / 6.0
    w1 = t * (t - 2) * (t - 3) / 2.0
    w2 = -t * (t - 1) * (t - 3) / 2.0
    w3 = t * (t - 1) * (t - 2) / 6.0
    return float(w0 * y0 + w1 * y1 + w2 * y2 + w3 * y3)


@dataclass(eq=False)
class FreeBoundaryCurve:
    """Boundary abscissa per time level; ``nan`` marks an absent entry.

    ``node_index`` is the outermost contact node on the boundary side
    (``-1`` when absent); ``x`` is the sub-grid refined location.
    """

    kind: Side
    tau: np.ndarray
    x: np.ndarray
    node_index: np.ndarray
    tol: float

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.x)

    @property
    def is_empty(self) -> bool:
        return not self.present.any()

    def first(self) -> tuple[float, float]:
        """``(tau, x)`` of the earliest present entry."""
        idx = np.flatnonzero(self.present)
        if idx.size == 0:
            return math.nan, math.nan
        return float(self.tau[idx[0]]), float(self.x[idx[0]])


def _refine(xs, excess, i_contact, step):
    """Sub-grid boundary between contact node ``i_contact`` and its neighbour
    ``i_contact + step`` (continuation side).

    Near a smooth-fit contact the excess over the payoff grows quadratically,
    so its square root is interpolated linearly from the next two
    continuation nodes and the zero is clamped into the bracketing cell.
    """
    n = xs.size
    j1, j2 = i_contact + step, i_contact + 2 * step
    if not (0 <= j1 < n):
        return float(xs[i_contact])
    s1 = math.sqrt(max(excess[j1], 0.0))
    s2 = math.sqrt(max(excess[j2], 0.0)) if 0 <= j2 < n else s1
    frac = s1 / (s2 - s1) if s2 > s1 else 1.0
    frac = min(max(frac, 0.0), 1.0)
    # distance walked back from j1 towards i_contact
    return float(xs[j1] - step * frac * (xs[1] - xs[0]))


def boundary_from_contact(kind: Side, xs, tau, contact, excess, tol,
                          limit: float | None = None) -> FreeBoundaryCurve:
    """Outermost contact node per level (inf for calls, sup for puts), refined.

    ``contact`` is a boolean ``(levels, nodes)`` array already restricted to
    the admissible side of the strike; level 0 is always reported absent.
    ``limit`` (the strike's log) keeps refined positions on that side.
    """
    levels = contact.shape[0]
    x = np.full(levels, np.nan)
    idx = np.full(levels, -1, dtype=int)
    for k in range(1, levels):
        hits = np.flatnonzero(contact[k])
        if hits.size == 0:
            continue
        if kind is Side.CALL_SIDE:
            i = int(hits[0])
            x[k] = _refine(xs, excess[k], i, -1)
            if limit is not None:
                x[k] = max(x[k], limit)
        else:
            i = int(hits[-1])
            x[k] = _refine(xs, excess[k], i, +1)
            if limit is not None:
                x[k] = min(x[k], limit)
        idx[k] = i
    return FreeBoundaryCurve(kind, np.asarray(tau, dtype=float), x, idx, tol)


def vanilla_boundary_data(kind: PayoffKind, cfg: ValidatedConfig, mode: str):
    p, L = cfg.market, cfg.numerics.L
    if mode == "neumann":
        return (0.0, math.exp(L)) if kind is PayoffKind.CALL else (-math.exp(-L), 0.0)
    if kind is PayoffKind.CALL:
        return (0.0, math.exp(L) - p.K_c)
    return (p.K_p - math.exp(-L), 0.0)


def solve_vanilla(kind: PayoffKind, cfg: ValidatedConfig, g: SolveGrid, method: str = PSOR,
                  *, eps: float | None = None) -> ValueSurface:
    """March the call (horizon ``T_c``) or put (horizon ``T_p``) obstacle problem.

    With ``method="penalty"`` the obstacle and initial datum are the
    smoothed payoffs ``phi_eps(e^x - K_c)`` / ``phi_eps(K_p - e^x)``.
    """
    p, c = cfg.market, cfg.numerics
    mode = c.boundary_mode
    op = assemble(p, g, mode, vanilla_boundary_data(kind, cfg, mode))
    n_steps = cfg.n_call if kind is PayoffKind.CALL else cfg.n_put
    horizon = p.T_c if kind is PayoffKind.CALL else p.T_p
    pf = None
    offset = 0.0
    if method == PENALTY:
        eps = c.eps if eps is None else eps
        psi = phi(SmootherFn(eps), exercise_value(kind, p, g.x_nodes))
        pf = PenaltyFn.for_market(p, c.L, eps)
        offset = eps
    else:
        psi = payoff(kind, p, g.x_nodes)
        eps = None
    psi = np.ascontiguousarray(psi)
    values, log = march(
        op, g.dt, n_steps, psi.copy(), lambda k: psi, method=method, theta=c.theta,
        rannacher_steps=c.rannacher_steps, numerics=c, penalty=pf,
    )
    role = Role.CALL if kind is PayoffKind.CALL else Role.PUT
    return ValueSurface(
        role=role, values=values, grid=g, horizon=horizon, method=method,
        obstacle=np.broadcast_to(psi, values.shape), contact_offset=offset, eps=eps, log=log,
    )


def extract_boundary(surface: ValueSurface, cfg: ValidatedConfig, tol: float | None = None) -> FreeBoundaryCurve:
    """Free boundary of a vanilla surface.

    A node is in contact when ``V - payoff <= offset + tol * (1 + e^x)``
    (after lifting ``V`` to the payoff). Calls report the smallest contact
    node above ``ln K_c``, puts the largest below ``ln K_p``. In degenerate
    ``q = 0`` mode a call surface yields an all-absent curve.
    """
    p = cfg.market
    tol = cfg.numerics.fb_tol if tol is None else tol
    xs = surface.grid.x_nodes
    kind = PayoffKind.CALL if surface.role is Role.CALL else PayoffKind.PUT
    ex = payoff(kind, p, xs)
    v = np.maximum(surface.values, ex)
    excess = v - ex - surface.contact_offset
    thresh = tol * (1.0 + np.exp(xs))
    if kind is PayoffKind.CALL:
        limit = math.log(p.K_c)
        contact = (excess <= thresh) & (xs > limit)
        side = Side.CALL_SIDE
        if cfg.degenerate_q0:
            contact[:] = False
    else:
        limit = math.log(p.K_p)
        contact = (excess <= thresh) & (xs < limit)
        side = Side.PUT_SIDE
    return boundary_from_contact(side, xs, surface.tau, contact, excess, tol, limit)


def limit_call_boundary(cfg: ValidatedConfig) -> float:
    """Short-maturity limit ``ln(max(1, r/q) K_c)`` of the call boundary."""
    p = cfg.market
    return math.log(max(1.0, p.r / p.q) * p.K_c) if p.q > 0 else math.inf


def limit_put_boundary(cfg: ValidatedConfig) -> float:
    p = cfg.market
    return math.log(min(1.0, p.r / p.q) * p.K_p) if p.q > 0 else math.log(p.K_p)
