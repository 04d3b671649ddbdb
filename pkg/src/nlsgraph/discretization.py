"""Finite-difference Laplacian on a star graph with a vertex coupling.

The operator is stored in generalized form ``H = W^{-1} K``: ``K`` is the
symmetric stiffness matrix whose quadratic form is the discrete
``||psi'||^2 + (vertex term)`` and ``W`` the diagonal trapezoid mass matrix.
The far ends ``x = L`` carry homogeneous Dirichlet values and are not unknowns.

Unknown layout
--------------
Delta / Kirchhoff: ``[u_vertex, edge_1[1:M-1], ..., edge_N[1:M-1]]`` -- one
shared vertex unknown gives exact continuity.

DeltaPrimeS: ``[edge_1[0:M-1], ..., edge_N[0:M-1]]`` -- each edge keeps its
own vertex value; the coupling is ``(N/beta) sum_j |u_j(0) - mean|^2``.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

from ._tridiag import solve_tridiagonal
from .errors import UnsupportedError
from .graph_core import Delta, DeltaPrimeS, GraphFunction, StarGrid, VertexCondition


class StarOperator:
    def __init__(self, grid: StarGrid, cond: VertexCondition):
        if not isinstance(cond, (Delta, DeltaPrimeS)):
            raise UnsupportedError(f"no finite-difference operator for {cond!r}")
        self.grid = grid
        self.cond = cond
        n, m, h = grid.n_edges, grid.n_points, grid.h
        self.shared_vertex = isinstance(cond, Delta)
        if self.shared_vertex:
            self.edge_len = m - 2  # nodes 1..M-2
            self.offset = 1
        else:
            self.edge_len = m - 1  # nodes 0..M-2
            self.offset = 0
        self.size = self.offset + n * self.edge_len

        # per-edge tridiagonal of K (edge blocks only, vertex coupling handled apart)
        ne = self.edge_len
        diag = np.full((n, ne), 2.0 / h)
        if not self.shared_vertex:
            diag[:, 0] = 1.0 / h + (n - 1) / cond.beta
        off = np.full((n, ne), -1.0 / h)
        off[:, -1] = 0.0  # no coupling between consecutive edge blocks
        self._edge_diag = diag.ravel()
        self._edge_off = off.ravel()[:-1]

        w = np.full(self.size, h)
        if self.shared_vertex:
            w[0] = 0.5 * n * h
            self.vertex_diag = n / h + cond.alpha
        else:
            w[np.arange(n) * ne] = 0.5 * h
        self.weights = w
        self._first = self.offset + np.arange(n) * ne  # first unknown on each edge
        self._stiffness = None

    # ------------------------------------------------------------------ layout

    def to_vector(self, f) -> np.ndarray:
        values = f.values if isinstance(f, GraphFunction) else np.asarray(f)
        if self.shared_vertex:
            return np.concatenate([[values[:, 0].mean()], values[:, 1:-1].ravel()])
        return values[:, :-1].ravel().copy()

    def to_values(self, vec: np.ndarray) -> np.ndarray:
        n, m = self.grid.shape
        out = np.zeros((n, m), dtype=vec.dtype)
        body = vec[self.offset:].reshape(n, self.edge_len)
        if self.shared_vertex:
            out[:, 0] = vec[0]
            out[:, 1:-1] = body
        else:
            out[:, :-1] = body
        return out

    def to_function(self, vec: np.ndarray) -> GraphFunction:
        return GraphFunction(self.to_values(vec), self.grid)

    # ---------------------------------------------------------------- matrices

    def stiffness(self) -> sparse.csr_matrix:
        if self._stiffness is not None:
            return self._stiffness
        h = self.grid.h
        o = self.offset
        idx = np.arange(self.size - o) + o
        rows = [idx, idx[:-1], idx[1:]]
        cols = [idx, idx[1:], idx[:-1]]
        vals = [self._edge_diag, self._edge_off, self._edge_off]
        if self.shared_vertex:
            first = self._first
            zero = np.zeros_like(first)
            rows += [np.array([0]), zero, first]
            cols += [np.array([0]), first, zero]
            vals += [np.array([self.vertex_diag]), np.full(first.size, -1.0 / h),
                     np.full(first.size, -1.0 / h)]
        else:
            a, b = np.meshgrid(self._first, self._first, indexing="ij")
            mask = a != b
            rows.append(a[mask])
            cols.append(b[mask])
            vals.append(np.full(mask.sum(), -1.0 / self.cond.beta))
        k = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.size, self.size),
        ).tocsr()
        k.eliminate_zeros()
        self._stiffness = k
        return k

    def apply_stiffness(self, vec: np.ndarray) -> np.ndarray:
        return self.stiffness() @ vec

    def quadratic_form(self, vec: np.ndarray) -> float:
        """``psi^* K psi``: discrete ``||psi'||^2`` plus the vertex term."""
        n = self.grid.n_edges
        h = self.grid.h
        values = self.to_values(vec)
        grad = np.sum(np.abs(np.diff(values, axis=1)) ** 2) / h
        v0 = values[:, 0]
        if self.shared_vertex:
            vert = self.cond.alpha * abs(v0[0]) ** 2
        else:
            vert = n / self.cond.beta * np.sum(np.abs(v0 - v0.mean()) ** 2)
        return float(grad + vert)

    def symmetric_matrix(self, potential: np.ndarray | None = None) -> sparse.csr_matrix:
        """``W^{-1/2} K W^{-1/2} + diag(potential)`` (potential given per unknown)."""
        s = sparse.diags(1.0 / np.sqrt(self.weights))
        a = s @ self.stiffness() @ s
        if potential is not None:
            a = a + sparse.diags(potential)
        return sparse.csr_matrix(a)

    # ------------------------------------------------------------------ solver

    def solve(self, c_mass, c_stiff, diag_extra, rhs: np.ndarray) -> np.ndarray:
        """Solve ``(c_mass W + c_stiff K + diag(diag_extra * W)) x = rhs``.

        The edge blocks are tridiagonal and decoupled; the vertex coupling is
        eliminated by a Schur complement (shared vertex) or Sherman-Morrison
        (DeltaPrimeS), so every call costs one banded solve with two
        right-hand sides.
        """
        w = self.weights
        d = c_mass * w + diag_extra * w
        dtype = np.result_type(d, c_stiff, rhs, float)
        o = self.offset
        main = d[o:] + c_stiff * self._edge_diag
        off = c_stiff * self._edge_off
        if self.shared_vertex:
            coup = np.zeros(self.size - o, dtype=dtype)
            coup[self._first - o] = -c_stiff / self.grid.h
            sol = solve_tridiagonal(off, main, off, np.column_stack([rhs[o:], coup]))
            y, z = sol[:, 0], sol[:, 1]
            d0 = d[0] + c_stiff * self.vertex_diag
            u0 = (rhs[0] - coup @ y) / (d0 - coup @ z)
            out = np.empty(self.size, dtype=dtype)
            out[0] = u0
            out[1:] = y - z * u0
            return out

        # DeltaPrimeS: the vertex block of K is diag + (-1/beta) e e^T; the
        # rank-one part (including its diagonal) is removed from the band and
        # restored by Sherman-Morrison.
        beta = self.cond.beta
        main = main.astype(dtype, copy=True)
        main[self._first] += c_stiff / beta
        e = np.zeros(self.size, dtype=dtype)
        e[self._first] = 1.0
        sol = solve_tridiagonal(off, main, off, np.column_stack([rhs, e]))
        y, z = sol[:, 0], sol[:, 1]
        c = -c_stiff / beta
        return y - z * (c * (e @ y) / (1.0 + c * (e @ z)))
