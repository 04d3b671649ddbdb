from __future__ import annotations

import numpy as np
import pytest
from scipy import sparse

from nlsgraph import Delta, DeltaPrimeS, GeneralU, Kirchhoff, StarGrid
from nlsgraph._tridiag import solve_tridiagonal
from nlsgraph.discretization import StarOperator
from nlsgraph.errors import UnsupportedError

CONDITIONS = [Delta(-1.3), Kirchhoff(), Delta(0.8), DeltaPrimeS(0.7), DeltaPrimeS(-2.0)]


@pytest.mark.parametrize("cond", CONDITIONS, ids=repr)
def test_stiffness_symmetric_and_matches_form(cond, rng):
    op = StarOperator(StarGrid(3, 4.0, 41), cond)
    k = op.stiffness()
    assert abs(k - k.T).max() == 0.0
    v = rng.normal(size=op.size)
    assert v @ (k @ v) == pytest.approx(op.quadratic_form(v), rel=1e-12)


@pytest.mark.parametrize("cond", CONDITIONS, ids=repr)
@pytest.mark.parametrize("coeffs", [(1.0, 0.3, 0.2), (2000j, -1.0, 0.5), (1.0, 5e-4j, 0.0)])
def test_structured_solve_matches_sparse_solve(cond, coeffs, rng):
    op = StarOperator(StarGrid(4, 3.0, 31), cond)
    c_mass, c_stiff, extra = coeffs
    extra = extra * (1 + rng.random(op.size))
    rhs = rng.normal(size=op.size) + 1j * rng.normal(size=op.size)
    x = op.solve(c_mass, c_stiff, extra, rhs)
    mat = (c_mass * sparse.diags(op.weights) + c_stiff * op.stiffness()
           + sparse.diags(extra * op.weights))
    assert np.max(np.abs(mat @ x - rhs)) < 1e-12 * np.max(np.abs(rhs)) * max(1, abs(c_mass))


def test_layout_roundtrip(rng):
    g = StarGrid(3, 2.0, 11)
    for cond in (Kirchhoff(), DeltaPrimeS(1.0)):
        op = StarOperator(g, cond)
        v = rng.normal(size=op.size)
        assert np.array_equal(op.to_vector(op.to_values(v)), v)
        assert np.all(op.to_values(v)[:, -1] == 0.0)


def test_shared_vertex_weights_sum_to_edge_lengths():
    g = StarGrid(3, 2.0, 11)
    op = StarOperator(g, Kirchhoff())
    # far endpoints are Dirichlet nodes with weight h/2 each, not unknowns
    assert op.weights.sum() == pytest.approx(3 * 2.0 - 3 * 0.5 * g.h)


def test_general_u_not_discretized():
    with pytest.raises(UnsupportedError):
        StarOperator(StarGrid(3, 1.0, 11), GeneralU(np.eye(3)))


def test_laplacian_spectrum_bottom_with_attractive_delta():
    # -d^2/dx^2 with delta(alpha<0) has the eigenvalue -alpha^2/N^2
    g = StarGrid.from_spacing(3, 20.0, 1e-2)
    op = StarOperator(g, Delta(-1.5))
    a = op.symmetric_matrix()
    lam = np.linalg.eigvalsh(a.toarray())[0] if op.size < 500 else None
    if lam is None:
        from scipy.sparse.linalg import eigsh
        lam = eigsh(a.tocsc(), k=1, sigma=-1.0, which="LM")[0][0]
    assert lam == pytest.approx(-(1.5**2) / 9, abs=1e-3)


def test_tridiagonal_kernel_real_and_complex(rng):
    n = 50
    for dtype in (float, complex):
        lower = rng.normal(size=n - 1).astype(dtype)
        upper = rng.normal(size=n - 1).astype(dtype)
        diag = (4 + rng.random(n)).astype(dtype)
        rhs = rng.normal(size=(n, 3)).astype(dtype)
        x = solve_tridiagonal(lower, diag, upper, rhs)
        t = np.diag(diag) + np.diag(lower, -1) + np.diag(upper, 1)
        assert np.max(np.abs(t @ x - rhs)) < 1e-12
