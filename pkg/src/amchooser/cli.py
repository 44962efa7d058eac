"""Command-line entry point: ``amchooser {solve,verify,figures,compare-oracle,sweep}``.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 solver failure (non-convergence and friends).
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import _kernels, io
from .errors import (
    ChooserError,
    IncommensurableGrids,
    IncommensurableHorizons,
    InvalidLattice,
    RejectedParams,
)
from .grid import PayoffKind
from .oracle import commensurable_lattice_steps, lattice_american, lattice_chooser
from .params import CONFIG_KEYS, MarketParams, NumericsConfig, ValidatedConfig, parse_config_text, validate
from .penalty import anchor_k0
from .pipeline import PipelineResult, boundary_modulus, run_pipeline, slope_jump_near_xbar
from .stepping import METHODS, PENALTY, PSOR
from .vanilla import limit_call_boundary, limit_put_boundary

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

SURFACE_FILES = {
    "call": "call_surface.csv",
    "put": "put_surface.csv",
    "chooser": "chooser_surface.csv",
    "obstacle": "obstacle_surface.csv",
}
BOUNDARY_FILES = {
    "chooser_put": "boundary_put.csv",
    "chooser_call": "boundary_call.csv",
    "vanilla_put": "vanilla_boundary_put.csv",
    "vanilla_call": "vanilla_boundary_call.csv",
}
REGIONS_FILE = "regions.csv"
MANIFEST_FILE = "manifest"
FIG_FILES = ("fig1_vanilla_boundaries.csv", "fig2_solution_slices.csv", "fig3_chooser_boundaries.csv")
FIG2_FRACTIONS = (0.25, 0.5, 0.75, 1.0)

_CONFIG_ERRORS = (RejectedParams, IncommensurableGrids, IncommensurableHorizons, InvalidLattice)


# -- configuration -------------------------------------------------------------


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def _add_config_args(ap: argparse.ArgumentParser) -> None:
    g = ap.add_argument_group("configuration")
    g.add_argument("--config", type=Path, help="key = value config file (defaults: standard market)")
    for key, (_, attr) in CONFIG_KEYS.items():
        if key in ("eps", "boundary_mode"):
            continue
        kind = int if attr in ("M", "N") else float
        g.add_argument(_flag(key), dest=key, type=kind, default=None, metavar=key.upper())
    g.add_argument("--eps", type=float, default=None, help="penalty smoothing width")
    g.add_argument("--boundary", "--boundary-mode", dest="boundary_mode",
                   choices=("neumann", "dirichlet"), default=None)
    g.add_argument("--degenerate-q0", action="store_true", help="accept q = 0 (no call-side boundary)")
    ap.add_argument("--method", choices=METHODS, default=PSOR)


def config_from_args(args) -> ValidatedConfig:
    """Standard market, overlaid by ``--config``, overlaid by explicit flags."""
    market = asdict(MarketParams.standard())
    numerics = {}
    if args.config is not None:
        if not args.config.is_file():
            raise FileNotFoundError(f"config not found: {args.config}")
        m_kw, n_kw = parse_config_text(args.config.read_text())
        market.update(m_kw)
        numerics.update(n_kw)
    for key, (section, attr) in CONFIG_KEYS.items():
        val = getattr(args, key, None)
        if val is not None:
            (market if section == "market" else numerics)[attr] = val
    return validate(MarketParams(**market), NumericsConfig(**numerics), degenerate_q0=args.degenerate_q0)


# -- solve ---------------------------------------------------------------------


def write_run(res: PipelineResult, out: Path, *, suite_summary: str = "not run") -> dict:
    """Write every surface, boundary and the region mask, then the manifest last."""
    out.mkdir(parents=True, exist_ok=True)
    xs = res.grid.x_nodes
    surfaces = {
        "call": res.call, "put": res.put, "chooser": res.chooser, "obstacle": res.problem.obstacle,
    }
    paths = {}
    for name, surf in surfaces.items():
        paths[name] = io.atomic_write(out / SURFACE_FILES[name], io.surface_csv(surf.values, xs, surf.tau))
    curves = {
        "chooser_put": res.chooser_put_fb, "chooser_call": res.chooser_call_fb,
        "vanilla_put": res.put_fb, "vanilla_call": res.call_fb,
    }
    for name, curve in curves.items():
        paths[name] = io.atomic_write(out / BOUNDARY_FILES[name], io.boundary_csv(curve))
    paths["regions"] = io.atomic_write(out / REGIONS_FILE, io.regions_csv(res.mask.labels, xs, res.mask.tau))

    entries = {}
    for k, v in res.cfg.as_dict().items():
        entries[f"config.{k}"] = v
    entries["method"] = res.method
    entries["backend"] = _kernels.BACKEND
    entries["penalty_eps"] = res.chooser.eps if res.method == PENALTY else "none"
    entries["penalty_k0"] = anchor_k0(res.cfg.market, res.cfg.numerics.L)
    for name in ("call", "put", "chooser"):
        log = surfaces[name].log
        entries[f"residual.{name}.max"] = log.max_residual
        entries[f"iterations.{name}.total"] = log.total_iterations
    entries["xbar"] = res.xbar
    entries["x_c0"] = res.x_c0()
    entries["x_p0"] = res.x_p0()
    for name, curve in curves.items():
        entries[f"modulus.{name}"] = boundary_modulus(curve)
    for k, jump in slope_jump_near_xbar(res).items():
        entries[f"slope_jump_xbar.level{k}"] = jump
    for name, sec in res.timings.items():
        entries[f"time.{name}_s"] = sec
    for name, path in paths.items():
        entries[f"file.{name}"] = path.name
    entries["suite"] = suite_summary
    io.atomic_write(out / MANIFEST_FILE, io.manifest_text(entries))
    return paths


def cmd_solve(args) -> int:
    cfg = config_from_args(args)
    res = run_pipeline(cfg, args.method, eps=cfg.numerics.eps)
    summary = "not run"
    if args.with_verify:
        from .verify import run_suite
        rep = run_suite(cfg, args.method, result=res)
        summary = _suite_summary(rep)
    write_run(res, args.out, suite_summary=summary)
    print(f"wrote {args.out} (method={args.method}, backend={_kernels.BACKEND})")
    return EXIT_OK


def _suite_summary(rep) -> str:
    n_fail = len(rep.failed)
    n_skip = sum(c.status.value == "SKIPPED" for c in rep.checks)
    return f"{len(rep.checks) - n_fail - n_skip} passed, {n_fail} failed, {n_skip} skipped"


# -- verify --------------------------------------------------------------------


def cmd_verify(args) -> int:
    from .verify import run_suite

    cfg = config_from_args(args)
    rep = run_suite(cfg, args.method, spots=tuple(args.spots), lattice_steps=args.lattice_steps,
                    corrupt=args.inject_fault)
    sys.stdout.write(rep.text())
    if args.report is not None:
        io.atomic_write(args.report, rep.lines())
    if rep.failed:
        print("failed checks: " + ", ".join(c.name for c in rep.failed), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# -- figures -------------------------------------------------------------------


def figure_tables(run_dir: Path) -> dict[str, str]:
    """Build the three plot-data CSVs from a completed run directory."""
    if not run_dir.is_dir():
        raise FileNotFoundError(f"run directory not found: {run_dir}")
    needed = [SURFACE_FILES["chooser"], SURFACE_FILES["obstacle"], *BOUNDARY_FILES.values()]
    missing = [n for n in needed if not (run_dir / n).is_file()]
    if missing:
        raise FileNotFoundError(f"run directory {run_dir} lacks {', '.join(missing)}")

    tc, xc, _ = io.read_boundary_csv(run_dir / BOUNDARY_FILES["vanilla_call"])
    tp, xp, _ = io.read_boundary_csv(run_dir / BOUNDARY_FILES["vanilla_put"])
    n = max(tc.size, tp.size)
    tau1 = tc if tc.size == n else tp
    pad = lambda a: np.concatenate([a, np.full(n - a.size, np.nan)])  # noqa: E731
    fig1 = io.table_csv(["tau", "x_call", "x_put"], zip(tau1, pad(xc), pad(xp)))

    V, xs, tau = io.read_surface_csv(run_dir / SURFACE_FILES["chooser"])
    J, _, _ = io.read_surface_csv(run_dir / SURFACE_FILES["obstacle"])
    levels = sorted({round(f * (tau.size - 1)) for f in FIG2_FRACTIONS})
    rows = ((tau[k], xs[i], V[k, i], J[k, i]) for k in levels for i in range(xs.size))
    fig2 = io.table_csv(["tau", "x", "V", "J"], rows)

    t3, x3p, _ = io.read_boundary_csv(run_dir / BOUNDARY_FILES["chooser_put"])
    _, x3c, _ = io.read_boundary_csv(run_dir / BOUNDARY_FILES["chooser_call"])
    fig3 = io.table_csv(["tau", "x_put_side", "x_call_side"], zip(t3, x3p, x3c))
    return dict(zip(FIG_FILES, (fig1, fig2, fig3)))


def cmd_figures(args) -> int:
    out = args.out if args.out is not None else args.run_dir
    tables = figure_tables(args.run_dir)
    for name, text in tables.items():
        io.atomic_write(out / name, text)
    print(f"wrote {', '.join(tables)} to {out}")
    return EXIT_OK


# -- compare-oracle --------------------------------------------------------------


def oracle_table(res: PipelineResult, spots, lattice_steps: int) -> list[tuple]:
    p = res.cfg.market
    n_lat = commensurable_lattice_steps(p, lattice_steps)
    rows = []
    for spot in spots:
        pde = res.prices(spot)
        refs = {
            "call": lattice_american(p, PayoffKind.CALL, spot, n_lat),
            "put": lattice_american(p, PayoffKind.PUT, spot, n_lat),
            "chooser": lattice_chooser(p, spot, n_lat),
        }
        for name in ("call", "put", "chooser"):
            ref = refs[name]
            gap = abs(pde[name] - ref) / abs(ref) if ref != 0 else math.nan  # undefined
            rows.append((float(spot), name, pde[name], ref, gap))
    return rows


def cmd_compare_oracle(args) -> int:
    cfg = config_from_args(args)
    L = cfg.numerics.L
    for s in args.spots:
        if not s > 0:
            raise RejectedParams(f"spot {s} must be positive")
        if abs(math.log(s)) > L - 2.0:
            print(f"warning: spot {s:g} lies within 2 log-units of the truncation edge "
                  f"(|ln S| > L - 2 = {L - 2:.4g}); PDE values there are unreliable", file=sys.stderr)
    res = run_pipeline(cfg, args.method, eps=cfg.numerics.eps) if args.spots else None
    rows = oracle_table(res, args.spots, args.lattice_steps) if res is not None else []
    text = io.table_csv(["spot", "contract", "pde", "lattice", "rel_gap"], rows)
    sys.stdout.write(text)
    if args.out is not None:
        io.atomic_write(args.out, text)
    return EXIT_OK


# -- sweep ---------------------------------------------------------------------


def _sweep_job(spec: tuple) -> dict:
    market, numerics, degenerate, method, spots = spec
    cfg = validate(market, numerics, degenerate_q0=degenerate)
    t0 = time.perf_counter()
    res = run_pipeline(cfg, method, eps=numerics.eps, check=False)
    out = {
        "eps": numerics.eps, "M": cfg.numerics.M, "N": cfg.numerics.N, "h": cfg.h, "dt": cfg.dt,
        "prices": [res.chooser.price(s) for s in spots],
        "put_limit_err": abs(res.chooser_put_fb.first()[1] - min(res.xbar, res.x_p0())),
        "call_limit_err": abs(res.chooser_call_fb.first()[1] - max(res.xbar, res.x_c0())),
        "vput_limit_err": abs(res.put_fb.first()[1] - limit_put_boundary(cfg)),
        "vcall_limit_err": abs(res.call_fb.first()[1] - limit_call_boundary(cfg)),
        "violation": float(max((res.problem.obstacle.values - res.chooser.values).max(), 0.0)),
        "seconds": time.perf_counter() - t0,
        "values": res.chooser.values,
    }
    return out


def sweep_specs(cfg: ValidatedConfig, kind: str, levels: int, method: str, spots) -> list[tuple]:
    specs = []
    c = cfg.numerics
    for j in range(levels):
        if kind == "eps":
            num = replace(c, eps=c.eps / 2**j)
            meth = PENALTY
        else:
            # h -> h/2 keeps the node set nested; dt -> dt/4
            num = replace(c, M=(c.M + 1) * 2**j - 1, N=c.N * 4**j)
            meth = method
        specs.append((cfg.market, num, cfg.degenerate_q0, meth, tuple(spots)))
    return specs


def run_sweep(specs, jobs: int) -> list[dict]:
    if jobs <= 1 or len(specs) <= 1:
        return [_sweep_job(s) for s in specs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_job, specs))


def sweep_table(results: list[dict], kind: str, spots) -> str:
    header = ["eps", "M", "N", "h", "dt"] + [f"chooser@{s:g}" for s in spots]
    header += ["put_side_limit_err", "call_side_limit_err", "vanilla_put_limit_err",
               "vanilla_call_limit_err", "max_violation", "change_vs_previous"]
    rows = []
    prev = None
    for r in results:
        if prev is None:
            change = math.nan
        elif kind == "eps":
            change = float(np.abs(r["values"] - prev["values"]).max())
        else:
            change = max((abs(a - b) for a, b in zip(r["prices"], prev["prices"])), default=math.nan)
        rows.append([r["eps"], r["M"], r["N"], r["h"], r["dt"], *r["prices"], r["put_limit_err"],
                     r["call_limit_err"], r["vput_limit_err"], r["vcall_limit_err"], r["violation"], change])
        prev = r
    return io.table_csv(header, rows)


def cmd_sweep(args) -> int:
    cfg = config_from_args(args)
    if args.levels < 1:
        raise RejectedParams("--levels must be >= 1")
    specs = sweep_specs(cfg, args.kind, args.levels, args.method, args.spots)
    results = run_sweep(specs, args.jobs)
    text = sweep_table(results, args.kind, args.spots)
    sys.stdout.write(text)
    if args.out is not None:
        io.atomic_write(args.out, text)
    return EXIT_OK


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="amchooser", description="American chooser option solver")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="solve and export surfaces, boundaries, regions, manifest")
    _add_config_args(sp)
    sp.add_argument("--out", type=Path, default=Path("run"))
    sp.add_argument("--with-verify", action="store_true", help="also run the property suite for the manifest")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("verify", help="run the property suite")
    _add_config_args(sp)
    sp.add_argument("--spots", type=float, nargs="*", default=[80.0, 100.0, 120.0])
    sp.add_argument("--lattice-steps", type=int, default=2000)
    sp.add_argument("--inject-fault", action="store_true",
                    help="push the chooser surface below its obstacle at one node")
    sp.add_argument("--report", type=Path, default=None, help="write name/status/margin lines here")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("figures", help="plot data from a run directory")
    sp.add_argument("run_dir", type=Path)
    sp.add_argument("--out", type=Path, default=None)
    sp.set_defaults(func=cmd_figures)

    sp = sub.add_parser("compare-oracle", help="PDE vs lattice prices")
    _add_config_args(sp)
    sp.add_argument("--spots", type=float, nargs="*", default=[80.0, 100.0, 120.0])
    sp.add_argument("--lattice-steps", type=int, default=2000)
    sp.add_argument("--out", type=Path, default=None)
    sp.set_defaults(func=cmd_compare_oracle)

    sp = sub.add_parser("sweep", help="eps-halving or grid-refinement study")
    _add_config_args(sp)
    sp.add_argument("--kind", choices=("eps", "grid"), default="eps")
    sp.add_argument("--levels", type=int, default=3)
    sp.add_argument("--spots", type=float, nargs="*", default=[100.0])
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out", type=Path, default=None)
    sp.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _CONFIG_ERRORS as exc:
        print(f"error [config]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ChooserError as exc:
        print(f"error [solver]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
