"""Theta-scheme time marching for discrete obstacle problems.

Each level solves either the linear complementarity problem

    A u >= b,  u >= psi,  (A u - b) . (u - psi) = 0

by projected SOR, or the penalized equation ``A u - b + beta(u - psi) = 0``
by Newton's method, where ``A = I/dt - theta L_h`` and
``b = (I/dt + (1-theta) L_h) u_prev + const``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .errors import NonConvergence
from .penalty import PenaltyFn, beta, beta_prime
from .tridiag import TriDiagMatrix, TriDiagOperator, solve_tridiag

PSOR = "psor"
PENALTY = "penalty"
METHODS = (PSOR, PENALTY)


@dataclass
class MarchLog:
    """Per-level solver diagnostics (index 0 is the initial datum, left empty)."""

    residuals: list[float] = field(default_factory=list)
    iterations: list[int] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)

    @property
    def total_iterations(self) -> int:
        return int(sum(self.iterations))


def lcp_residual(mat: TriDiagMatrix, rhs, u, psi, rows=None) -> float:
    """Row-scaled complementarity residual ``max |min((Au-b)/diag, u-psi)|``."""
    r = (mat.dot(u) - rhs) / mat.diag
    res = np.abs(np.minimum(r, u - psi))
    if rows is not None:
        res = res[rows]
    return float(res.max(initial=0.0))


def psor_step(mat, rhs, psi, guess, omega, tol, max_iter, level=None):
    u, iters, delta = _kernels.psor(
        mat.lower, mat.diag, mat.upper, rhs, psi, guess, float(omega), float(tol), int(max_iter)
    )
    if delta > tol:
        raise NonConvergence(
            f"PSOR stalled at level {level}: last increment {delta:.3e} > {tol:.3e}",
            history=[delta], level=level,
        )
    return u, iters


def penalty_step(mat, rhs, psi, guess, pf: PenaltyFn, mask, tol, max_iter, level=None):
    """Damped Newton on ``A u - b + beta(u - psi) = 0``. ``mask`` selects penalized rows."""
    u = np.maximum(guess, psi)
    scale = mat.diag

    def resid(v):
        return mat.dot(v) - rhs + mask * beta(pf, v - psi)

    f = resid(u)
    history = [float(np.max(np.abs(f / scale)))]
    for it in range(1, max_iter + 1):
        jac = mat.with_diag(mask * beta_prime(pf, u - psi))
        step = solve_tridiag(jac, -f)
        lam = 1.0
        norm0 = history[-1]
        while True:
            trial = u + lam * step
            f_trial = resid(trial)
            norm = float(np.max(np.abs(f_trial / scale)))
            if norm <= (1.0 - 1e-4 * lam) * norm0 or lam < 1.0 / 64:
                break
            lam *= 0.5
        u, f = trial, f_trial
        history.append(norm)
        if float(np.max(np.abs(lam * step))) <= tol:
            return u, it, norm
    raise NonConvergence(f"Newton did not converge at level {level}", history=history, level=level)


def march(
    op: TriDiagOperator,
    dt: float,
    n_steps: int,
    u0: np.ndarray,
    obstacle_at: Callable[[int], np.ndarray],
    *,
    method: str,
    theta: float,
    rannacher_steps: int,
    numerics,
    penalty: PenaltyFn | None = None,
    dirichlet_at: Callable[[int], tuple[float, float]] | None = None,
) -> tuple[np.ndarray, MarchLog]:
    """Advance ``u0`` through ``n_steps`` levels; returns ``(values, log)``.

    The first ``rannacher_steps`` levels use fully implicit steps to damp
    the payoff kink before switching to ``theta``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if method == PENALTY and penalty is None:
        raise ValueError("penalty method needs a PenaltyFn")
    n = u0.size
    values = np.empty((n_steps + 1, n))
    values[0] = u0
    log = MarchLog([0.0], [0])
    mats = {}
    mask = np.ones(n)
    if op.bc_row_low.kind == "dirichlet":
        mask[0] = 0.0
    if op.bc_row_high.kind == "dirichlet":
        mask[-1] = 0.0
    rows = mask > 0

    for k in range(1, n_steps + 1):
        th = 1.0 if k <= rannacher_steps else theta
        if th not in mats:
            mats[th] = op.implicit_matrix(dt, th)
        mat = mats[th]
        bc = dirichlet_at(k) if dirichlet_at is not None else None
        rhs = op.explicit_rhs(values[k - 1], dt, th, dirichlet=bc)
        psi = np.ascontiguousarray(obstacle_at(k), dtype=float)
        if method == PSOR:
            u, iters = psor_step(
                mat, rhs, psi, values[k - 1], numerics.psor_omega, numerics.psor_tol,
                numerics.psor_max_iter, level=k,
            )
            res = lcp_residual(mat, rhs, u, psi, rows)
        else:
            u, iters, res = penalty_step(
                mat, rhs, psi, values[k - 1], penalty, mask, numerics.newton_tol,
                numerics.newton_max_iter, level=k,
            )
        values[k] = u
        log.residuals.append(res)
        log.iterations.append(int(iters))
    return values, log
