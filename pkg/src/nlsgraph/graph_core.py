"""Discretized star graphs, functions on them, and vertex conditions.

Every edge of the star is truncated to ``[0, L]`` and sampled on a uniform
grid of ``M`` points; index 0 is the vertex on every edge.  Integrals use the
composite trapezoid rule, derivatives second-order finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DomainError, ShapeError

UNITARY_TOL = 1e-12


@dataclass(frozen=True)
class StarGrid:
    n_edges: int
    edge_length: float
    n_points: int

    def __post_init__(self):
        if int(self.n_edges) != self.n_edges or self.n_edges < 2:
            raise DomainError(f"n_edges must be an integer >= 2, got {self.n_edges}")
        if not self.edge_length > 0:
            raise DomainError(f"edge_length must be positive, got {self.edge_length}")
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise DomainError(f"n_points must be an integer >= 3, got {self.n_points}")

    @classmethod
    def from_spacing(cls, n_edges: int, edge_length: float, h: float) -> "StarGrid":
        """Grid whose spacing is as close as possible to (and not above) ``h``."""
        n_points = int(np.ceil(edge_length / h - 1e-9)) + 1
        return cls(n_edges, float(edge_length), max(n_points, 3))

    @property
    def h(self) -> float:
        return self.edge_length / (self.n_points - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_edges, self.n_points)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.edge_length, self.n_points)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights for one edge."""
        w = np.full(self.n_points, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def zeros(self, dtype=float) -> "GraphFunction":
        return GraphFunction(np.zeros(self.shape, dtype=dtype), self)

    def from_edges(self, *funcs) -> "GraphFunction":
        """Build a GraphFunction from one callable per edge (or a single callable for all)."""
        if len(funcs) == 1:
            funcs = funcs * self.n_edges
        if len(funcs) != self.n_edges:
            raise ShapeError(f"expected {self.n_edges} edge functions, got {len(funcs)}")
        x = self.x
        return GraphFunction(np.array([np.broadcast_to(f(x), x.shape) for f in funcs]), self)


@dataclass(frozen=True, eq=False)
class GraphFunction:
    values: np.ndarray
    grid: StarGrid

    def __post_init__(self):
        values = np.asarray(self.values)
        if not np.iscomplexobj(values):
            values = values.astype(float)
        if values.shape != self.grid.shape:
            raise ShapeError(f"values of shape {values.shape} do not fit grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("GraphFunction values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def _check(self, other: "GraphFunction"):
        if other.grid != self.grid:
            raise ShapeError("GraphFunctions live on different grids")

    def __add__(self, other):
        if isinstance(other, GraphFunction):
            self._check(other)
            return GraphFunction(self.values + other.values, self.grid)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, GraphFunction):
            self._check(other)
            return GraphFunction(self.values - other.values, self.grid)
        return NotImplemented

    def __mul__(self, c):
        if np.isscalar(c):
            return GraphFunction(c * self.values, self.grid)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return GraphFunction(-self.values, self.grid)

    def conj(self) -> "GraphFunction":
        return GraphFunction(np.conj(self.values), self.grid)

    @property
    def vertex_values(self) -> np.ndarray:
        return self.values[:, 0]

    def edge_mass(self) -> np.ndarray:
        """Trapezoid mass of each edge separately."""
        return np.abs(self.values) ** 2 @ self.grid.weights


# ---------------------------------------------------------------------------
# vertex conditions


@dataclass(frozen=True, eq=False)
class VertexCondition:
    """Base class; subclasses give the rows of ``A psi(0) + B psi'(0) = 0``."""

    def boundary_rows(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Delta(VertexCondition):
    """Continuity plus ``sum_j psi_j'(0) = alpha psi(0)``."""

    alpha: float = 0.0

    def __eq__(self, other):
        return isinstance(other, Delta) and float(self.alpha) == float(other.alpha)

    def __hash__(self):
        return hash(("delta", float(self.alpha)))

    def __repr__(self):
        return f"Delta(alpha={self.alpha!r})"

    @property
    def is_kirchhoff(self) -> bool:
        return self.alpha == 0

    def boundary_rows(self, n):
        a = np.zeros((n, n))
        b = np.zeros((n, n))
        for r in range(n - 1):
            a[r, 0], a[r, r + 1] = 1.0, -1.0
        a[n - 1, 0] = -self.alpha
        b[n - 1, :] = 1.0
        return a, b

    def unitary(self, n: int) -> np.ndarray:
        return 2.0 / (n + 1j * self.alpha) * np.ones((n, n)) - np.eye(n)


@dataclass(frozen=True, eq=False, repr=False)
class Kirchhoff(Delta):
    """Free coupling; compares equal to ``Delta(0)``."""

    alpha: float = field(default=0.0, init=False)

    def __repr__(self):
        return "Kirchhoff()"


@dataclass(frozen=True)
class DeltaPrimeS(VertexCondition):
    """``sum psi_j'(0) = 0`` and ``psi_j(0) - psi_k(0) = (beta/N)(psi_j'(0) - psi_k'(0))``."""

    beta: float

    def __post_init__(self):
        if self.beta == 0:
            raise DomainError("DeltaPrimeS needs beta != 0 (beta = 0 is the Kirchhoff condition)")

    def boundary_rows(self, n):
        a = np.zeros((n, n))
        b = np.zeros((n, n))
        for r in range(n - 1):
            a[r, 0], a[r, r + 1] = 1.0, -1.0
            b[r, 0], b[r, r + 1] = -self.beta / n, self.beta / n
        b[n - 1, :] = 1.0
        return a, b


@dataclass(frozen=True, eq=False)
class GeneralU(VertexCondition):
    """``(U - 1) psi(0) + i (U + 1) psi'(0) = 0`` for a unitary ``U``."""

    matrix: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.matrix, dtype=complex)
        if not validate_unitary(u):
            raise DomainError("GeneralU matrix is not unitary to 1e-12")
        u.setflags(write=False)
        object.__setattr__(self, "matrix", u)

    def __eq__(self, other):
        return isinstance(other, GeneralU) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())

    def boundary_rows(self, n):
        if self.matrix.shape != (n, n):
            raise ShapeError(f"U is {self.matrix.shape}, graph has {n} edges")
        eye = np.eye(n)
        return self.matrix - eye, 1j * (self.matrix + eye)


def validate_unitary(u) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {u.shape}")
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= UNITARY_TOL)


# ---------------------------------------------------------------------------
# norms and derivatives


def lp_norm(f: GraphFunction, p: float = 2.0, rule: str = "trapezoid") -> float:
    """``(sum_j int |psi_j|^p dx)^(1/p)``.

    ``rule="simpson"`` switches to composite Simpson on each edge; it is used
    where an O(h^4) quadrature oracle is wanted.
    """
    if not p >= 1:
        raise DomainError(f"p must be >= 1, got {p}")
    if rule not in ("trapezoid", "simpson"):
        raise ValueError(f"unknown quadrature rule {rule!r}")
    mod = np.abs(f.values)
    scale = float(mod.max(initial=0.0))
    if scale == 0.0 or not np.isfinite(scale):
        return scale
    # normalise first so |psi|^p neither underflows nor overflows
    integrand = (mod / scale) ** p
    if rule == "trapezoid":
        total = float(np.sum(integrand @ f.grid.weights))
    else:
        total = float(np.sum(integrate.simpson(integrand, dx=f.grid.h, axis=1)))
    return scale * total ** (1.0 / p)


def derivative(f: GraphFunction) -> GraphFunction:
    """Centered differences inside, three-point one-sided at both ends."""
    return GraphFunction(np.gradient(f.values, f.grid.h, axis=1, edge_order=2), f.grid)


def vertex_derivatives(f: GraphFunction) -> np.ndarray:
    """Outgoing derivatives ``psi_j'(0)`` from ``(-3 f0 + 4 f1 - f2) / 2h``."""
    v = f.values
    return (-3.0 * v[:, 0] + 4.0 * v[:, 1] - v[:, 2]) / (2.0 * f.grid.h)


def h1_seminorm(f: GraphFunction) -> float:
    return lp_norm(derivative(f), 2)


def inner_product(f: GraphFunction, g: GraphFunction) -> complex:
    """Trapezoid ``sum_j int conj(f_j) g_j dx``; conjugate-linear in ``f``."""
    if f.grid != g.grid:
        raise ShapeError("inner_product of functions on different grids")
    return complex(np.sum((np.conj(f.values) * g.values) @ f.grid.weights))


def vertex_residual(f: GraphFunction, cond: VertexCondition) -> float:
    """Largest mismatch among the defining equations of ``cond`` at the vertex."""
    a, b = cond.boundary_rows(f.grid.n_edges)
    res = a @ f.vertex_values + b @ vertex_derivatives(f)
    return float(np.max(np.abs(res)))
