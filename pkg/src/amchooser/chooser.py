"""Chooser obstacle problem: obstacle assembly, crossing point, solve, regions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import bisect

from .errors import IncommensurableGrids, MultipleCrossings, NoCrossing, OverlapDetected
from .grid import SolveGrid
from .params import MarketParams, ValidatedConfig
from .penalty import PenaltyFn, SmootherFn, smoothed_obstacle
from .stepping import PENALTY, PSOR, march
from .tridiag import assemble
from .vanilla import FreeBoundaryCurve, Role, Side, ValueSurface, boundary_from_contact


class Region(enum.IntEnum):
    CONTINUATION = 0
    PUT_EXERCISE = 1
    CALL_EXERCISE = 2


@dataclass(eq=False)
class ChooserProblem:
    """Embedded surfaces, their index offsets and the obstacle ``max(C, P)``.

    ``obstacle.values[k] == max(call.values[k + call_offset], put.values[k + put_offset])``.
    """

    call_surface: ValueSurface
    put_surface: ValueSurface
    call_offset: int
    put_offset: int
    obstacle: ValueSurface
    xbar: float

    @property
    def C(self) -> np.ndarray:
        """Call values on chooser levels ``0..N``."""
        n = self.obstacle.n_levels
        return self.call_surface.values[self.call_offset : self.call_offset + n]

    @property
    def P(self) -> np.ndarray:
        n = self.obstacle.n_levels
        return self.put_surface.values[self.put_offset : self.put_offset + n]


@dataclass(eq=False)
class RegionMask:
    """Node labels (see :class:`Region`) and the contact excesses used for refinement."""

    labels: np.ndarray
    put_excess: np.ndarray
    call_excess: np.ndarray
    tau: np.ndarray
    fb_tol: float
    overlap_count: int = 0

    def count(self, region: Region) -> int:
        return int(np.count_nonzero(self.labels == region))


def _offset(horizon_gap: float, dt: float) -> int:
    k = horizon_gap / dt
    if abs(k - round(k)) > 1e-9 * max(1.0, k):
        raise IncommensurableGrids(f"maturity gap {horizon_gap} is not a multiple of dt={dt}")
    return int(round(k))


def find_xbar(xs: np.ndarray, C0: np.ndarray, P0: np.ndarray) -> float:
    """Root of ``C(0, x) - P(0, x)``, bisected on cubic-spline interpolants.

    Raises :class:`NoCrossing` or :class:`MultipleCrossings` unless the
    difference changes sign exactly once on the grid.
    """
    d = np.asarray(C0) - np.asarray(P0)
    s = np.sign(d)
    nz = np.flatnonzero(s != 0)
    changes = np.flatnonzero(s[nz][1:] != s[nz][:-1])
    if changes.size == 0:
        raise NoCrossing("C(0,x) - P(0,x) has no sign change on the grid")
    if changes.size > 1:
        raise MultipleCrossings(f"C(0,x) - P(0,x) changes sign {changes.size} times")
    i, j = nz[changes[0]], nz[changes[0] + 1]
    if j > i + 1:  # exact zero(s) on nodes between
        return float(xs[i + 1])
    spline = CubicSpline(xs, d)
    return float(bisect(lambda x: float(spline(x)), xs[i], xs[j], xtol=1e-14, maxiter=200))


def count_sign_changes(values: np.ndarray) -> int:
    s = np.sign(values)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def build_obstacle(call: ValueSurface, put: ValueSurface, cfg: ValidatedConfig) -> ChooserProblem:
    p = cfg.market
    g = call.grid
    if put.grid is not g and not np.array_equal(put.grid.x_nodes, g.x_nodes):
        raise IncommensurableGrids("call and put surfaces live on different grids")
    co = _offset(p.T_c - p.T, g.dt)
    po = _offset(p.T_p - p.T, g.dt)
    n = cfg.numerics.N + 1
    if co + n > call.n_levels or po + n > put.n_levels:
        raise IncommensurableGrids("vanilla surfaces do not cover the chooser horizon")
    J = np.maximum(call.values[co : co + n], put.values[po : po + n])
    obst = ValueSurface(Role.OBSTACLE, J, g, p.T, method=call.method, obstacle=J)
    xbar = find_xbar(g.x_nodes, call.values[co], put.values[po])
    return ChooserProblem(call, put, co, po, obst, xbar)


def chooser_boundary_data(cfg: ValidatedConfig, mode: str):
    L = cfg.numerics.L
    if mode == "neumann":
        return (-math.exp(-L), math.exp(L))
    return (0.0, 0.0)  # replaced level by level with the obstacle's end values


def solve_chooser(prob: ChooserProblem, cfg: ValidatedConfig, method: str = PSOR,
                  *, eps: float | None = None) -> ValueSurface:
    """March the chooser obstacle problem over ``[0, T]``.

    Projected SOR enforces ``V >= J`` exactly. The penalty method uses the
    smoothed obstacle ``J_eps = phi_eps(C - P) + P`` and starts from it.
    """
    p, c = cfg.market, cfg.numerics
    g = prob.obstacle.grid
    mode = c.boundary_mode
    op = assemble(p, g, mode, chooser_boundary_data(cfg, mode))
    C, P = prob.C, prob.P
    if method == PENALTY:
        eps = c.eps if eps is None else eps
        sf = SmootherFn(eps)
        psi_all = smoothed_obstacle(sf, C, P)
        pf = PenaltyFn.for_market(p, c.L, eps)
        offset = eps + max(prob.call_surface.contact_offset, prob.put_surface.contact_offset)
    else:
        psi_all = prob.obstacle.values
        pf = None
        eps = None
        offset = 0.0
    psi_all = np.ascontiguousarray(psi_all)
    dirichlet = None
    if mode == "dirichlet":
        def dirichlet(k):
            return (float(psi_all[k, 0]), float(psi_all[k, -1]))
    values, log = march(
        op, g.dt, c.N, psi_all[0].copy(), lambda k: psi_all[k], method=method, theta=c.theta,
        rannacher_steps=c.rannacher_steps, numerics=c, penalty=pf, dirichlet_at=dirichlet,
    )
    return ValueSurface(
        role=Role.CHOOSER, values=values, grid=g, horizon=p.T, method=method,
        obstacle=psi_all, contact_offset=offset, eps=eps, log=log,
    )


def classify_regions(V: ValueSurface, prob: ChooserProblem, cfg: ValidatedConfig,
                     fb_tol: float | None = None) -> RegionMask:
    """Label nodes by contact with the raw payoffs ``K_p - e^x`` / ``e^x - K_c``.

    Contact means ``|V - payoff| <= offset + fb_tol * scale`` with scale
    ``1 + K_p`` on the put side and ``1 + e^x`` on the call side; ``V`` is
    first lifted to the exact obstacle ``max(C, P)``.
    """
    p = cfg.market
    fb_tol = cfg.numerics.fb_tol if fb_tol is None else fb_tol
    xs = V.grid.x_nodes
    ex = np.exp(xs)
    v = np.maximum(V.values, prob.obstacle.values)
    put_excess = np.abs(v - (p.K_p - ex)) - V.contact_offset
    call_excess = np.abs(v - (ex - p.K_c)) - V.contact_offset
    put_hit = (put_excess <= fb_tol * (1.0 + p.K_p)) & (xs < math.log(p.K_p))
    call_hit = (call_excess <= fb_tol * (1.0 + ex)) & (xs > math.log(p.K_c))
    if cfg.degenerate_q0:
        call_hit[:] = False
    both = put_hit & call_hit
    overlap = int(np.count_nonzero(both))
    if overlap:
        k, i = np.argwhere(both)[0]
        raise OverlapDetected(f"node (level {k}, x={xs[i]:.6g}) touches both payoffs")
    labels = np.zeros(v.shape, dtype=np.int8)
    labels[put_hit] = Region.PUT_EXERCISE
    labels[call_hit] = Region.CALL_EXERCISE
    return RegionMask(labels, put_excess, call_excess, V.tau, fb_tol, overlap)


def extract_chooser_boundaries(mask: RegionMask, g: SolveGrid,
                               p: MarketParams | None = None) -> tuple[FreeBoundaryCurve, FreeBoundaryCurve]:
    """``(put_side, call_side)``: sup of put-exercise and inf of call-exercise nodes per level."""
    xs = g.x_nodes
    lo = math.log(p.K_p) if p is not None else None
    hi = math.log(p.K_c) if p is not None else None
    put = boundary_from_contact(
        Side.PUT_SIDE, xs, mask.tau, mask.labels == Region.PUT_EXERCISE, mask.put_excess, mask.fb_tol, lo
    )
    call = boundary_from_contact(
        Side.CALL_SIDE, xs, mask.tau, mask.labels == Region.CALL_EXERCISE, mask.call_excess, mask.fb_tol, hi
    )
    return put, call
