"""Compare the compiled and pure-Python kernels on the standard chooser operator.

    python benchmarks/bench_kernels.py [--sizes 100 400 800] [--repeat 5]

Both backends are loaded side by side, fed identical systems (the implicit
theta-matrix of the standard market), and timed with ``timeit``. The
maximum absolute difference of their outputs is printed as well.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from amchooser import MarketParams, NumericsConfig, build_grid, validate
from amchooser._kernels import _pykernels
from amchooser.grid import PayoffKind, payoff
from amchooser.tridiag import assemble

try:
    from amchooser._kernels import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None


def system(m: int):
    cfg = validate(MarketParams.standard(), NumericsConfig(M=m, N=50))
    g = build_grid(cfg)
    op = assemble(cfg.market, g, "neumann", (0.0, float(np.exp(cfg.numerics.L))))
    mat = op.implicit_matrix(cfg.dt, 0.5)
    psi = np.ascontiguousarray(payoff(PayoffKind.CALL, cfg.market, g.x_nodes))
    rhs = op.explicit_rhs(psi, cfg.dt, 0.5)
    return mat, np.ascontiguousarray(rhs), psi


def bench(mod, mat, rhs, psi, repeat):
    def run_thomas():
        return mod.thomas(mat.lower, mat.diag, mat.upper, rhs)

    def run_psor():
        return mod.psor(mat.lower, mat.diag, mat.upper, rhs, psi, psi, 1.2, 1e-10, 10000)

    t_th = min(timeit.repeat(run_thomas, number=1, repeat=repeat))
    t_ps = min(timeit.repeat(run_psor, number=1, repeat=repeat))
    return t_th, t_ps, np.asarray(run_thomas()[0]), np.asarray(run_psor()[0])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="*", default=[100, 400, 800])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels unavailable; build with `pip install -e . --no-build-isolation`")
    print(f"{'M':>6} {'kernel':>7} {'python [ms]':>12} {'cython [ms]':>12} {'speedup':>8} {'max|diff|':>10}")
    for m in args.sizes:
        mat, rhs, psi = system(m)
        py = bench(_pykernels, mat, rhs, psi, args.repeat)
        cy = bench(_ckernels, mat, rhs, psi, args.repeat) if _ckernels is not None else None
        for j, name in ((0, "thomas"), (1, "psor")):
            t_py = py[j] * 1e3
            if cy is None:
                print(f"{m:>6} {name:>7} {t_py:>12.3f} {'-':>12} {'-':>8} {'-':>10}")
                continue
            t_cy = cy[j] * 1e3
            diff = float(np.abs(py[2 + j] - cy[2 + j]).max())
            print(f"{m:>6} {name:>7} {t_py:>12.3f} {t_cy:>12.4f} {t_py / t_cy:>8.1f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
