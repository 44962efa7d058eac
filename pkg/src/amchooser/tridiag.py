"""Finite-difference assembly of the pricing operator and tridiagonal solves.

The operator is ``L = (sigma^2/2) d_xx + (r - q - sigma^2/2) d_x - r`` in
log-price. Interior rows use central differences unless the grid is too
coarse for them to keep the implicit matrix an M-matrix, in which case the
convection term is upwinded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import SingularSystem
from .grid import SolveGrid
from .params import MarketParams


@dataclass(frozen=True)
class TriDiagMatrix:
    """Bands of a tridiagonal matrix; ``lower[0]`` and ``upper[-1]`` are zero."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def dot(self, u: np.ndarray) -> np.ndarray:
        out = self.diag * u
        out[1:] += self.lower[1:] * u[:-1]
        out[:-1] += self.upper[:-1] * u[1:]
        return out

    def dense(self) -> np.ndarray:
        n = self.diag.size
        a = np.diag(self.diag)
        a[np.arange(1, n), np.arange(n - 1)] = self.lower[1:]
        a[np.arange(n - 1), np.arange(1, n)] = self.upper[:-1]
        return a

    def with_diag(self, extra: np.ndarray) -> "TriDiagMatrix":
        return TriDiagMatrix(self.lower, self.diag + extra, self.upper)


@dataclass(frozen=True)
class BoundaryRow:
    """Closure of the first or last row.

    For ``kind == "neumann"`` the row of ``L_h`` after eliminating the ghost
    node is ``diag * u_b + off * u_nb + const``; ``value`` is the prescribed
    slope. For ``kind == "dirichlet"`` ``value`` is the boundary value and the
    coefficients are unused.
    """

    kind: str
    value: float
    diag: float = 0.0
    off: float = 0.0
    const: float = 0.0


@dataclass(frozen=True)
class TriDiagOperator:
    """Discrete ``L_h`` on the full node set ``x_0..x_{M+1}``.

    ``lower``, ``diag`` and ``upper`` hold the coefficients of the ``M``
    interior rows on ``u_{i-1}``, ``u_i`` and ``u_{i+1}``.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    bc_row_low: BoundaryRow
    bc_row_high: BoundaryRow
    h: float
    upwind: bool

    @property
    def size(self) -> int:
        return self.diag.size + 2

    def bands(self) -> tuple[TriDiagMatrix, np.ndarray]:
        """``L_h`` as full bands plus the affine boundary term (zero on Dirichlet rows)."""
        n = self.size
        lo = np.zeros(n)
        di = np.zeros(n)
        up = np.zeros(n)
        const = np.zeros(n)
        lo[1:-1], di[1:-1], up[1:-1] = self.lower, self.diag, self.upper
        if self.bc_row_low.kind == "neumann":
            di[0], up[0], const[0] = self.bc_row_low.diag, self.bc_row_low.off, self.bc_row_low.const
        if self.bc_row_high.kind == "neumann":
            di[-1], lo[-1], const[-1] = self.bc_row_high.diag, self.bc_row_high.off, self.bc_row_high.const
        return TriDiagMatrix(lo, di, up), const

    def apply(self, u: np.ndarray) -> np.ndarray:
        """``L_h u`` (the affine Neumann term included, Dirichlet rows zero)."""
        mat, const = self.bands()
        return mat.dot(u) + const

    def implicit_matrix(self, dt: float, theta: float) -> TriDiagMatrix:
        """``I/dt - theta L_h`` with identity rows at Dirichlet ends."""
        mat, _ = self.bands()
        lo, di, up = -theta * mat.lower, 1.0 / dt - theta * mat.diag, -theta * mat.upper
        for idx, row in ((0, self.bc_row_low), (-1, self.bc_row_high)):
            if row.kind == "dirichlet":
                lo[idx] = up[idx] = 0.0
                di[idx] = 1.0
        return TriDiagMatrix(lo, di, up)

    def explicit_rhs(self, u: np.ndarray, dt: float, theta: float, dirichlet=None) -> np.ndarray:
        """``(I/dt + (1-theta) L_h) u + const``; Dirichlet rows carry the boundary values.

        ``dirichlet`` optionally overrides the stored boundary values with a
        ``(low, high)`` pair for the new level.
        """
        mat, const = self.bands()
        rhs = u / dt + (1.0 - theta) * mat.dot(u) + const
        rows = (self.bc_row_low, self.bc_row_high)
        for j, (idx, row) in enumerate(((0, rows[0]), (-1, rows[1]))):
            if row.kind == "dirichlet":
                rhs[idx] = row.value if dirichlet is None else dirichlet[j]
        return rhs


def assemble(p: MarketParams, g: SolveGrid, mode: str = "neumann", bc_data=(0.0, 0.0)) -> TriDiagOperator:
    """Build ``L_h`` on ``g``.

    ``bc_data`` is the pair of boundary slopes (Neumann) or values
    (Dirichlet) at ``x = -L`` and ``x = L``.
    """
    h = g.h
    a = 0.5 * p.sigma**2
    b = p.r - p.q - 0.5 * p.sigma**2
    upwind = abs(b) * h > 2.0 * a
    if upwind:
        lo_c = a / h**2 + max(-b, 0.0) / h
        up_c = a / h**2 + max(b, 0.0) / h
    else:
        lo_c = a / h**2 - b / (2.0 * h)
        up_c = a / h**2 + b / (2.0 * h)
    di_c = -(lo_c + up_c) - p.r
    # M-matrix structure of I/dt - theta*L_h: nonpositive off-diagonals.
    assert lo_c >= 0.0 and up_c >= 0.0, "upwind switch failed to restore monotonicity"

    m = g.size - 2
    lower = np.full(m, lo_c)
    diag = np.full(m, di_c)
    upper = np.full(m, up_c)
    g_lo, g_hi = (float(v) for v in bc_data)
    if mode == "neumann":
        # ghost elimination: u_{-1} = u_1 - 2h g_lo, u_{M+2} = u_M + 2h g_hi
        low = BoundaryRow("neumann", g_lo, diag=di_c, off=lo_c + up_c, const=-2.0 * h * lo_c * g_lo)
        high = BoundaryRow("neumann", g_hi, diag=di_c, off=lo_c + up_c, const=2.0 * h * up_c * g_hi)
    elif mode == "dirichlet":
        low = BoundaryRow("dirichlet", g_lo)
        high = BoundaryRow("dirichlet", g_hi)
    else:
        raise ValueError(f"unknown boundary mode {mode!r}")
    return TriDiagOperator(lower, diag, upper, low, high, h, upwind)


def solve_tridiag(mat: TriDiagMatrix, rhs: np.ndarray) -> np.ndarray:
    """Thomas elimination. Raises :class:`SingularSystem` on a vanishing pivot."""
    x, status = _kernels.thomas(
        np.ascontiguousarray(mat.lower, dtype=float),
        np.ascontiguousarray(mat.diag, dtype=float),
        np.ascontiguousarray(mat.upper, dtype=float),
        np.ascontiguousarray(rhs, dtype=float),
    )
    if status >= 0:
        raise SingularSystem(f"pivot below 1e-300 at row {status}")
    return x
