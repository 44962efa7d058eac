import numpy as np
import pytest

from amchooser import NumericsConfig, SingularSystem, build_grid, validate
from amchooser.tridiag import TriDiagMatrix, assemble, solve_tridiag

from conftest import market


@pytest.fixture(scope="module")
def op_and_grid():
    cfg = validate(market(), NumericsConfig(M=200, N=10))
    g = build_grid(cfg)
    return assemble(cfg.market, g, "neumann", (0.0, 0.0)), g, cfg.market


def test_constant_maps_to_minus_r(op_and_grid):
    op, g, p = op_and_grid
    out = op.apply(np.ones(g.size))
    np.testing.assert_allclose(out[1:-1], -p.r, atol=1e-10)
    # zero-slope Neumann ends behave like interior rows for a constant
    np.testing.assert_allclose(out[[0, -1]], -p.r, atol=1e-10)


def test_linear_exact(op_and_grid):
    op, g, p = op_and_grid
    x = g.x_nodes
    out = op.apply(x)
    b = p.r - p.q - 0.5 * p.sigma**2
    np.testing.assert_allclose(out[1:-1], b - p.r * x[1:-1], atol=1e-9)


def test_exponential_eigenfunction(op_and_grid):
    op, g, p = op_and_grid
    x = g.x_nodes
    u = np.exp(x)
    out = op.apply(u)[1:-1]
    err = np.abs(out + p.q * u[1:-1]) / u[1:-1]
    # second-order consistency: relative error ~ (sigma^2/24 + |b|/6) h^2
    assert err.max() <= g.h**2


def test_m_matrix_and_dominance(op_and_grid):
    op, g, _ = op_and_grid
    assert not op.upwind
    mat = op.implicit_matrix(0.01, 0.5)
    assert np.all(mat.lower[1:] <= 0) and np.all(mat.upper[:-1] <= 0)
    off = np.abs(mat.lower) + np.abs(mat.upper)
    assert np.all(mat.diag > off)


def test_upwind_engages_on_coarse_grid():
    p = market(r=0.5, q=0.0, sigma=0.05)
    cfg = validate(p, NumericsConfig(L=3.0, M=5, N=4), degenerate_q0=True)
    op = assemble(p, build_grid(cfg), "neumann", (0.0, 0.0))
    assert op.upwind
    assert np.all(op.lower >= 0) and np.all(op.upper >= 0)


def test_neumann_ghost_rows_reproduce_slope(op_and_grid):
    op, g, p = op_and_grid
    slope = (2.0, -3.0)
    op2 = assemble(p, g, "neumann", slope)
    # a linear function with matching end slopes gets the same interior-style row
    u = 2.0 * g.x_nodes
    out = op2.apply(u)
    b = p.r - p.q - 0.5 * p.sigma**2
    assert out[0] == pytest.approx(2.0 * b - p.r * u[0], abs=1e-8)


def test_dirichlet_rows(op_and_grid):
    _, g, p = op_and_grid
    op = assemble(p, g, "dirichlet", (1.5, 2.5))
    mat = op.implicit_matrix(0.01, 0.5)
    assert mat.diag[0] == 1.0 and mat.upper[0] == 0.0
    assert mat.diag[-1] == 1.0 and mat.lower[-1] == 0.0
    rhs = op.explicit_rhs(np.zeros(g.size), 0.01, 0.5)
    assert rhs[0] == 1.5 and rhs[-1] == 2.5


def test_identity_solve():
    n = 6
    mat = TriDiagMatrix(np.zeros(n), np.ones(n), np.zeros(n))
    b = np.arange(n, dtype=float)
    np.testing.assert_array_equal(solve_tridiag(mat, b), b)


def test_three_by_three():
    mat = TriDiagMatrix(np.array([0.0, -1, -1]), np.full(3, 2.0), np.array([-1.0, -1, 0]))
    np.testing.assert_allclose(solve_tridiag(mat, np.array([1.0, 0, 1])), [1.0, 1.0, 1.0], atol=1e-14)


def test_dense_oracle():
    rng = np.random.default_rng(7)
    n = 50
    lo = rng.uniform(-1, 1, n)
    up = rng.uniform(-1, 1, n)
    lo[0] = up[-1] = 0.0
    di = np.abs(lo) + np.abs(up) + rng.uniform(0.5, 2.0, n)
    mat = TriDiagMatrix(lo, di, up)
    b = rng.normal(size=n)
    np.testing.assert_allclose(solve_tridiag(mat, b), np.linalg.solve(mat.dense(), b), atol=1e-10)


def test_singular_detected():
    mat = TriDiagMatrix(np.zeros(3), np.array([1.0, 0.0, 1.0]), np.zeros(3))
    with pytest.raises(SingularSystem):
        solve_tridiag(mat, np.ones(3))
