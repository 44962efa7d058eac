"""End-to-end solve: call, put, chooser, regions and boundaries."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .chooser import (
    ChooserProblem,
    RegionMask,
    build_obstacle,
    classify_regions,
    extract_chooser_boundaries,
    solve_chooser,
)
from .errors import RejectedParams
from .grid import PayoffKind, SolveGrid, build_grid
from .params import ValidatedConfig
from .stepping import PSOR
from .vanilla import FreeBoundaryCurve, ValueSurface, extract_boundary, solve_vanilla


@dataclass(eq=False)
class PipelineResult:
    cfg: ValidatedConfig
    method: str
    grid: SolveGrid
    call: ValueSurface
    put: ValueSurface
    problem: ChooserProblem
    chooser: ValueSurface
    mask: RegionMask
    call_fb: FreeBoundaryCurve
    put_fb: FreeBoundaryCurve
    chooser_put_fb: FreeBoundaryCurve
    chooser_call_fb: FreeBoundaryCurve
    timings: dict = field(default_factory=dict)

    @property
    def xbar(self) -> float:
        return self.problem.xbar

    def x_c0(self) -> float:
        """Vanilla call boundary at the chooser's maturity layer, ``x_c(0)``."""
        return float(self.call_fb.x[self.problem.call_offset])

    def x_p0(self) -> float:
        return float(self.put_fb.x[self.problem.put_offset])

    def prices(self, spot: float) -> dict:
        return {
            "call": self.call.price(spot),
            "put": self.put.price(spot),
            "chooser": self.chooser.price(spot),
        }


def check_truncation(res: PipelineResult) -> None:
    """Require ``L > max(|x_c(0)|, |x_p(0)|) + 2`` once the vanilla boundaries are known."""
    lims = [abs(v) for v in (res.x_c0(), res.x_p0()) if not math.isnan(v)]
    need = max(lims, default=0.0) + 2.0
    if not res.cfg.numerics.L > need:
        raise RejectedParams(f"grid_l = {res.cfg.numerics.L:.6g} must exceed {need:.6g}")


def run_pipeline(cfg: ValidatedConfig, method: str = PSOR, *, vanilla_method: str | None = None,
                 eps: float | None = None, check: bool = True) -> PipelineResult:
    """Solve everything for one configuration.

    ``vanilla_method`` defaults to ``method``; passing ``"psor"`` with a
    penalty chooser isolates the penalty error to the chooser layer.
    """
    vanilla_method = method if vanilla_method is None else vanilla_method
    timings = {}
    t0 = time.perf_counter()
    g = build_grid(cfg)
    call = solve_vanilla(PayoffKind.CALL, cfg, g, vanilla_method, eps=eps)
    timings["call"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    put = solve_vanilla(PayoffKind.PUT, cfg, g, vanilla_method, eps=eps)
    timings["put"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    prob = build_obstacle(call, put, cfg)
    chooser = solve_chooser(prob, cfg, method, eps=eps)
    timings["chooser"] = time.perf_counter() - t0
    mask = classify_regions(chooser, prob, cfg)
    put_ch, call_ch = extract_chooser_boundaries(mask, g, cfg.market)
    res = PipelineResult(
        cfg, method, g, call, put, prob, chooser, mask,
        extract_boundary(call, cfg), extract_boundary(put, cfg), put_ch, call_ch, timings,
    )
    if check:
        check_truncation(res)
    return res


def slope_bounds(values: np.ndarray, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central differences of each level and the matching difference of ``e^x``.

    ``D0 e^x = e^x sinh(h)/h`` is the exact stencil image of the continuous
    bound ``|V_x| <= e^x``; returns ``(D0 V, D0 e^x)`` on interior nodes.
    """
    h = xs[1] - xs[0]
    dv = (values[..., 2:] - values[..., :-2]) / (2.0 * h)
    ex = np.exp(xs)
    de = (ex[2:] - ex[:-2]) / (2.0 * h)
    return dv, de


def boundary_modulus(curve: FreeBoundaryCurve) -> float:
    """Largest move between consecutive present entries (observed modulus of continuity)."""
    x = curve.x[curve.present]
    return float(np.abs(np.diff(x)).max()) if x.size > 1 else math.nan


def slope_jump_near_xbar(res: PipelineResult, levels=(0, 1, 5, 20)) -> dict[int, float]:
    """Jump of the one-sided x-slopes of V at the node nearest ``xbar``, per level.

    ``J(0, .)`` has a corner at ``xbar``; how fast the jump decays over the
    first levels is the local signature of that corner.
    """
    xs = res.grid.x_nodes
    h = res.grid.h
    i = int(np.argmin(np.abs(xs - res.xbar)))
    out = {}
    for k in levels:
        if k < res.chooser.n_levels:
            v = res.chooser.values[k]
            out[k] = float(abs((v[i + 1] - v[i]) - (v[i] - v[i - 1])) / h)
    return out
