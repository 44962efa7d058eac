"""Executable property suite for one solved configuration.

:func:`run_suite` solves the whole chain, then evaluates each analytic
property of the solution at a tolerance tied to ``h``, ``dt`` or ``eps``.
Every check reports ``margin = tolerance - measured``; a check passes iff
its margin is nonnegative.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .grid import PayoffKind
from .oracle import black_scholes, commensurable_lattice_steps, lattice_american, lattice_chooser
from .params import ValidatedConfig, format_config
from .penalty import PenaltyFn, SmootherFn, beta, smoothed_obstacle
from .pipeline import PipelineResult, run_pipeline, slope_bounds
from .stepping import PENALTY, PSOR
from .vanilla import limit_call_boundary, limit_put_boundary

SLOPE_CONST = 10.0
TIME_MONO_TOL = 1e-9
BOUND_TOL = 1e-8
ORACLE_REL_TOL = 5e-3
DOMAIN_GROWTH_TOL = 1e-6
EPS_SWEEP_CONST = 5.0


class Status(enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    SKIPPED = "SKIPPED"


@dataclass
class Check:
    name: str
    prop: str
    status: Status
    measured: float = math.nan
    tolerance: float = math.nan
    detail: str = ""

    @property
    def margin(self) -> float:
        return self.tolerance - self.measured


@dataclass
class PropertyReport:
    checks: list[Check] = field(default_factory=list)
    fingerprint: str = ""

    @property
    def failed(self) -> list[Check]:
        return [c for c in self.checks if c.status is Status.FAIL]

    @property
    def ok(self) -> bool:
        return not self.failed

    def get(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> str:
        """Machine-readable form: ``name<TAB>status<TAB>margin<TAB>tolerance``."""
        out = [f"# fingerprint\t{self.fingerprint}"]
        for c in self.checks:
            out.append(f"{c.name}\t{c.status.value}\t{_fmt(c.margin)}\t{_fmt(c.tolerance)}")
        return "\n".join(out) + "\n"

    def text(self) -> str:
        width = max((len(c.name) for c in self.checks), default=10)
        out = [f"property report  (config {self.fingerprint[:16]})"]
        for c in self.checks:
            line = f"  [{c.status.value:>7}] {c.name:<{width}}  margin={_fmt(c.margin)}  tol={_fmt(c.tolerance)}"
            out.append(line)
            out.append(f"            {c.prop}" + (f"  -- {c.detail}" if c.detail else ""))
        n_fail = len(self.failed)
        n_skip = sum(c.status is Status.SKIPPED for c in self.checks)
        out.append(f"{len(self.checks)} checks: {len(self.checks) - n_fail - n_skip} passed, "
                   f"{n_fail} failed, {n_skip} skipped")
        return "\n".join(out) + "\n"


def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else f"{v:.6e}"


def fingerprint(cfg: ValidatedConfig, method: str) -> str:
    blob = format_config(cfg) + f"method = {method}\ndegenerate_q0 = {cfg.degenerate_q0}\n"
    blob += "".join(f"{k} = {v!r}\n" for k, v in sorted(cfg.as_dict().items()))
    return hashlib.sha256(blob.encode()).hexdigest()


class _Suite:
    def __init__(self):
        self.checks: list[Check] = []

    def measure(self, name, prop, tol, fn: Callable[[], tuple[float, str] | float], skip: str | None = None):
        if skip:
            self.checks.append(Check(name, prop, Status.SKIPPED, detail=skip))
            return
        try:
            out = fn()
        except Exception as exc:  # every solver failure becomes a failed check
            self.checks.append(Check(name, prop, Status.FAIL, math.inf, tol, f"{type(exc).__name__}: {exc}"))
            return
        measured, detail = out if isinstance(out, tuple) else (out, "")
        measured = float(measured)
        ok = (not math.isnan(measured)) and measured <= tol
        self.checks.append(Check(name, prop, Status.PASS if ok else Status.FAIL, measured, tol, detail))


def _located(arr: np.ndarray, xs: np.ndarray, tau: np.ndarray, offset: int = 0) -> str:
    k, i = np.unravel_index(int(np.argmax(arr)), arr.shape)
    return f"worst at level {k}, tau={tau[k]:.6g}, x={xs[i + offset]:.6g}"


# -- individual property measurements ----------------------------------------


def _bounds(res: PipelineResult, kind: PayoffKind):
    xs = res.grid.x_nodes
    p = res.cfg.market
    v = res.call.values if kind is PayoffKind.CALL else res.put.values
    upper = np.exp(xs) + 2.0 if kind is PayoffKind.CALL else np.full_like(xs, p.K_p + 2.0)
    viol = np.maximum(-v, v - upper)
    return float(viol.max()), _located(viol, xs, res.grid.tau_nodes)


def _slope_vanilla(res: PipelineResult, kind: PayoffKind):
    xs = res.grid.x_nodes
    v = res.call.values if kind is PayoffKind.CALL else res.put.values
    dv, de = slope_bounds(v, xs)
    if kind is PayoffKind.CALL:
        viol = np.maximum(-dv, dv - de)
    else:
        viol = np.maximum(dv, -dv - de)
    return float(viol.max()), _located(viol, xs, res.grid.tau_nodes, 1)


def _slope_any(values: np.ndarray, res: PipelineResult):
    xs = res.grid.x_nodes
    dv, de = slope_bounds(values, xs)
    viol = np.abs(dv) - de
    return float(viol.max()), _located(viol, xs, res.grid.tau_nodes, 1)


def _time_drop(values: np.ndarray, res: PipelineResult):
    """Largest negative forward difference quotient in ``tau``."""
    drop = -np.diff(values, axis=0) / res.grid.dt
    return float(max(drop.max(), 0.0)), _located(drop, res.grid.x_nodes, res.grid.tau_nodes[1:])


def _monotone(curve, increasing: bool, h: float, from_level: int = 1, to_level: int | None = None):
    """Largest per-step move against the expected direction (0 if none), plus ties."""
    x = curve.x[from_level:to_level]
    x = x[~np.isnan(x)]
    if x.size < 2:
        return math.nan, 0, 0.0
    d = np.diff(x)
    against = -d if increasing else d
    ties = int(np.count_nonzero(d == 0.0))
    net = (x[-1] - x[0]) if increasing else (x[0] - x[-1])
    return float(max(against.max(), 0.0)), ties, float(net)


def run_suite(cfg: ValidatedConfig, method: str = PSOR, *, spots=(100.0,), lattice_steps: int = 2000,
              corrupt: bool = False, result: PipelineResult | None = None) -> PropertyReport:
    """Run the pipeline and all checks. Never raises for solver failures.

    ``corrupt=True`` pushes the chooser surface below its obstacle at one
    node (fault injection for the dominance check).
    """
    s = _Suite()
    p, c = cfg.market, cfg.numerics
    h, dt = cfg.h, cfg.dt
    degenerate = cfg.degenerate_q0
    no_call = "q = 0: no call-side free boundary" if degenerate else None
    eps = c.eps

    try:
        res = result if result is not None else run_pipeline(cfg, method, check=False)
    except Exception as exc:
        s.checks.append(Check("pipeline.solve", "full solve completes", Status.FAIL, math.inf, 0.0,
                              f"{type(exc).__name__}: {exc}"))
        return PropertyReport(s.checks, fingerprint(cfg, method))

    if corrupt:
        res = _corrupted(res)

    xs = res.grid.x_nodes
    tau = res.grid.tau_nodes
    V = res.chooser.values
    J = res.problem.obstacle.values

    s.measure("params.truncation", "L > max(|x_c(0)|, |x_p(0)|) + 2", -1e-12,
              lambda: (_truncation_excess(res), f"L = {c.L:.6g}"))

    # vanilla call / put
    for kind, name in ((PayoffKind.CALL, "call"), (PayoffKind.PUT, "put")):
        upper = "e^x + 2" if kind is PayoffKind.CALL else "K_p + 2"
        s.measure(f"vanilla.{name}.bounds", f"0 <= {name} <= {upper}", BOUND_TOL, lambda k=kind: _bounds(res, k))
        rng = "[0, e^x]" if kind is PayoffKind.CALL else "[-e^x, 0]"
        s.measure(f"vanilla.{name}.slope", f"d_x {name} in {rng} (stencil image of e^x)", SLOPE_CONST * h,
                  lambda k=kind: _slope_vanilla(res, k))
        surf = res.call if kind is PayoffKind.CALL else res.put
        s.measure(f"vanilla.{name}.time_monotone", f"d_tau {name} >= 0", TIME_MONO_TOL,
                  lambda v=surf.values: _time_drop(v, res))

    band = 3.0 * h + 3.0 * math.sqrt(dt)
    s.measure("vanilla.call.boundary_monotone", "call boundary nondecreasing in tau (one-cell slack)", h,
              lambda: _monotone(res.call_fb, True, h)[0], skip=no_call)
    s.measure("vanilla.put.boundary_monotone", "put boundary nonincreasing in tau (one-cell slack)", h,
              lambda: _monotone(res.put_fb, False, h)[0])
    s.measure("vanilla.call.boundary_side", "call boundary >= ln K_c", h,
              lambda: float(np.nanmax(math.log(p.K_c) - res.call_fb.x)), skip=no_call)
    s.measure("vanilla.put.boundary_side", "put boundary <= ln K_p", h,
              lambda: float(np.nanmax(res.put_fb.x - math.log(p.K_p))))
    s.measure("vanilla.call.boundary_limit", "first-level call boundary near ln(max(1, r/q) K_c)", band,
              lambda: abs(res.call_fb.first()[1] - limit_call_boundary(cfg)), skip=no_call)
    s.measure("vanilla.put.boundary_limit", "first-level put boundary near ln(min(1, r/q) K_p)", band,
              lambda: abs(res.put_fb.first()[1] - limit_put_boundary(cfg)))
    s.measure("vanilla.put.american_ge_european", "American put >= European put (same tau)",
              p.K_p * (h**2 + dt), lambda: _am_eu_gap(res))

    # chooser
    s.measure("chooser.xbar_unique", "C(0,.) - P(0,.) has exactly one sign change", 0.0,
              lambda: _xbar_changes(res))
    dom_tol = eps if method == PENALTY else 1e-12
    s.measure("chooser.obstacle_dominance", "V >= max(C, P)", dom_tol,
              lambda: (float(max((J - V).max(), 0.0)), _located(J - V, xs, tau)))
    s.measure("chooser.initial_level", "V(0,.) equals the enforced initial obstacle", 0.0,
              lambda: float(np.abs(V[0] - res.chooser.obstacle[0]).max()))
    s.measure("chooser.time_monotone", "d_tau V >= 0", TIME_MONO_TOL, lambda: _time_drop(V, res))
    s.measure("chooser.slope", "|d_x V| <= e^x (stencil image)", SLOPE_CONST * h, lambda: _slope_any(V, res))
    s.measure("chooser.disjoint", "put-side and call-side exercise sets are disjoint", 0.0,
              lambda: float(res.mask.overlap_count))
    s.measure("chooser.nonempty.put", "put-side exercise set nonempty", 0.0,
              lambda: float(res.mask.count(1) == 0))
    s.measure("chooser.nonempty.call", "call-side exercise set nonempty", 0.0,
              lambda: float(res.mask.count(2) == 0), skip=no_call)
    s.measure("chooser.containment.put", "put exercise nodes lie in the vanilla put exercise set", h,
              lambda: _containment(res, "put"))
    s.measure("chooser.containment.call", "call exercise nodes lie in the vanilla call exercise set", h,
              lambda: _containment(res, "call"), skip=no_call)
    for side, inc, curve in (("put", False, res.chooser_put_fb), ("call", True, res.chooser_call_fb)):
        skip = no_call if side == "call" else None
        word = "nondecreasing" if inc else "nonincreasing"
        s.measure(f"chooser.{side}.boundary_monotone", f"{side}-side boundary {word} per step (one-cell slack)", h,
                  lambda cv=curve, i=inc: _mono_detail(cv, i, h), skip=skip)
        s.measure(f"chooser.{side}.boundary_strict", f"{side}-side boundary moves >= one cell over (0, T]", 0.0,
                  lambda cv=curve, i=inc: h - _monotone(cv, i, h)[2], skip=skip)
    s.measure("chooser.ordering", "x_p^ch <= x_p < x_c <= x_c^ch per level (one-cell slack)", h,
              lambda: _ordering(res))
    s.measure("chooser.put.boundary_limit", "first-level put-side boundary near min(xbar, x_p(0))", band,
              lambda: abs(res.chooser_put_fb.first()[1] - min(res.xbar, res.x_p0())))
    s.measure("chooser.call.boundary_limit", "first-level call-side boundary near max(xbar, x_c(0))", band,
              lambda: abs(res.chooser_call_fb.first()[1] - max(res.xbar, res.x_c0())), skip=no_call)

    # penalty consistency and domain stability need extra solves
    cache = {}

    def chooser_penalty(e):
        if e not in cache:
            cache[e] = run_pipeline(cfg, PENALTY, vanilla_method=PSOR, eps=e, check=False)
        return cache[e]

    def psor_ref():
        if method == PSOR and not corrupt:
            return res
        if "psor" not in cache:
            cache["psor"] = run_pipeline(cfg, PSOR, check=False)
        return cache["psor"]

    agree_tol = max(eps, 10.0 * c.psor_tol)
    s.measure("penalty.vanilla_agreement", "penalty and PSOR vanilla surfaces within eps", agree_tol,
              lambda: _vanilla_agreement(cfg, psor_ref(), eps))
    s.measure("penalty.chooser_agreement", "penalty and PSOR chooser surfaces within eps", agree_tol,
              lambda: float(np.abs(chooser_penalty(eps).chooser.values - psor_ref().chooser.values).max()))
    s.measure("penalty.eps_sweep", "halving eps moves V by <= 5 eps", EPS_SWEEP_CONST * eps,
              lambda: float(np.abs(chooser_penalty(eps).chooser.values
                                   - chooser_penalty(eps / 2).chooser.values).max()))
    s.measure("penalty.uniform_bounds", "-K0 <= beta(V - J_eps) <= 0 and V >= 0 for eps and eps/2", 0.0,
              lambda: _uniform_bounds(cfg, [chooser_penalty(eps), chooser_penalty(eps / 2)]))
    s.measure("chooser.domain_growth", "enlarging L by ~1 moves V on |x| <= L/2 by <= 1e-6 (PSOR)",
              DOMAIN_GROWTH_TOL, lambda: _domain_growth(cfg, psor_ref()))

    # lattice oracle
    n_lat = commensurable_lattice_steps(p, lattice_steps)
    for spot in spots:
        for name in ("call", "put", "chooser"):
            s.measure(f"oracle.{name}@{spot:g}", f"PDE {name} within 0.5% of a {n_lat}-step lattice",
                      ORACLE_REL_TOL, lambda sp=spot, nm=name: _oracle_gap(res, nm, sp, n_lat))

    return PropertyReport(s.checks, fingerprint(cfg, method))


def _truncation_excess(res):
    lims = [abs(v) for v in (res.x_c0(), res.x_p0()) if not math.isnan(v)]
    return max(lims, default=0.0) + 2.0 - res.cfg.numerics.L


def _xbar_changes(res):
    from .chooser import count_sign_changes

    pr = res.problem
    n = count_sign_changes(pr.C[0] - pr.P[0])
    return float(abs(n - 1)), f"{n} sign change(s), xbar = {pr.xbar:.6g}"


def _am_eu_gap(res):
    p = res.cfg.market
    xs = res.grid.x_nodes
    eu = black_scholes(PayoffKind.PUT, p, np.exp(xs)[None, :], res.put.tau[:, None])
    gap = eu - res.put.values
    return float(max(gap.max(), 0.0)), _located(gap, xs, res.put.tau)


def _containment(res, side):
    """How far (in x) an exercise node sits beyond the vanilla boundary at the offset time."""
    xs = res.grid.x_nodes
    pr = res.problem
    worst = 0.0
    for k in range(1, res.mask.labels.shape[0]):
        if side == "put":
            nodes = xs[res.mask.labels[k] == 1]
            ref = res.put_fb.x[k + pr.put_offset]
            if nodes.size:
                worst = max(worst, float(nodes.max() - ref) if not math.isnan(ref) else math.inf)
        else:
            nodes = xs[res.mask.labels[k] == 2]
            ref = res.call_fb.x[k + pr.call_offset]
            if nodes.size:
                worst = max(worst, float(ref - nodes.min()) if not math.isnan(ref) else math.inf)
    return worst


def _mono_detail(curve, increasing, h):
    worst, ties, net = _monotone(curve, increasing, h)
    return worst, f"ties={ties}, net move={net:.6g} ({net / h:.2f} cells)"


def _ordering(res):
    pr = res.problem
    h = res.cfg.h
    n = pr.obstacle.n_levels
    xp = res.put_fb.x[pr.put_offset : pr.put_offset + n]
    xc = res.call_fb.x[pr.call_offset : pr.call_offset + n]
    worst = []
    worst.append(np.nanmax(res.chooser_put_fb.x[1:] - xp[1:]))
    if not res.cfg.degenerate_q0:
        if np.any(xp[1:] >= xc[1:]):
            return math.inf, "vanilla boundaries touch or cross"
        worst.append(np.nanmax(xc[1:] - res.chooser_call_fb.x[1:]))
    gap = xc[1:] - xp[1:]
    detail = f"min gap x_c - x_p = {np.nanmin(gap):.6g}" if np.any(~np.isnan(gap)) else ""
    return float(max(max(worst), 0.0)), detail


def _vanilla_agreement(cfg, ref, eps):
    from .vanilla import solve_vanilla

    g = ref.grid
    gaps = []
    for kind, surf in ((PayoffKind.CALL, ref.call), (PayoffKind.PUT, ref.put)):
        pen = solve_vanilla(kind, cfg, g, PENALTY, eps=eps)
        gaps.append(float(np.abs(pen.values - surf.values).max()))
    return max(gaps), f"call gap {gaps[0]:.3e}, put gap {gaps[1]:.3e}"


def _uniform_bounds(cfg, results):
    p, c = cfg.market, cfg.numerics
    worst = 0.0
    for r in results:
        e = r.chooser.eps
        pf = PenaltyFn.for_market(p, c.L, e)
        jeps = smoothed_obstacle(SmootherFn(e), r.problem.C, r.problem.P)
        b = beta(pf, r.chooser.values - jeps)
        worst = max(worst, float((-pf.k0 - b).max()), float(b.max()), float((-r.chooser.values).max()))
    return worst


def _domain_growth(cfg, res):
    """Truncation sensitivity of the PSOR chain (the penalty anchor K0 itself depends on L)."""
    c = cfg.numerics
    h = cfg.h
    extra = max(1, round(1.0 / h))
    big = cfg.with_numerics(L=c.L + extra * h, M=c.M + 2 * extra)
    r2 = run_pipeline(big, PSOR, check=False)
    inner = np.abs(res.grid.x_nodes) <= c.L / 2
    v_small = res.chooser.values[:, inner]
    v_big = r2.chooser.values[:, extra:-extra][:, inner]
    return float(np.abs(v_small - v_big).max()), f"L {c.L:.6g} -> {big.numerics.L:.6g}"


def _oracle_gap(res, name, spot, n_lat):
    p = res.cfg.market
    if name == "chooser":
        ref = lattice_chooser(p, spot, n_lat)
    else:
        kind = PayoffKind.CALL if name == "call" else PayoffKind.PUT
        ref = lattice_american(p, kind, spot, n_lat)
    pde = res.prices(spot)[name]
    return abs(pde - ref) / abs(ref), f"pde={pde:.8g} lattice={ref:.8g}"


def _corrupted(res: PipelineResult) -> PipelineResult:
    vals = res.chooser.values.copy()
    k = vals.shape[0] // 2
    i = vals.shape[1] // 2
    vals[k, i] = res.problem.obstacle.values[k, i] - 1e-3
    chooser = replace(res.chooser, values=vals)
    return replace(res, chooser=chooser)
