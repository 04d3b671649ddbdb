"""Mass, energy, action, Nehari functional and the stationary-equation residual."""

from __future__ import annotations

import warnings

import numpy as np

from .graph_core import (
    Delta,
    DeltaPrimeS,
    GraphFunction,
    VertexCondition,
    h1_seminorm,
    lp_norm,
)
from .standing_waves import NLSParams, half_soliton_profile

VERTEX_MISMATCH_WARN = 1e-6


def mass(f: GraphFunction) -> float:
    return lp_norm(f, 2) ** 2


def _vertex_term(f: GraphFunction, params: NLSParams, cond: VertexCondition | None) -> float:
    """Vertex part of the quadratic form (without the factor 1/2)."""
    v0 = f.vertex_values
    if cond is None:
        cond = Delta(params.alpha)
    if isinstance(cond, DeltaPrimeS):
        n = f.grid.n_edges
        return float(n / cond.beta * np.sum(np.abs(v0 - v0.mean()) ** 2))
    if not isinstance(cond, Delta):
        raise TypeError(f"no energy functional for {cond!r}")
    if cond.alpha == 0:
        return 0.0
    spread = float(np.max(np.abs(v0 - v0[0])))
    if spread > VERTEX_MISMATCH_WARN:
        warnings.warn(f"vertex values differ across edges by {spread:.2e}; using their mean",
                      stacklevel=3)
        value = v0.mean()
    else:
        value = v0[0]
    return float(cond.alpha * abs(value) ** 2)


def _kinetic(f: GraphFunction, gradient: str) -> float:
    if gradient == "centered":
        return h1_seminorm(f) ** 2
    if gradient == "cell":
        # forward differences: the quadratic form of the evolution operator
        return float(np.sum(np.abs(np.diff(f.values, axis=1)) ** 2) / f.grid.h)
    raise ValueError(f"unknown gradient stencil {gradient!r}")


def energy(f: GraphFunction, params: NLSParams, cond: VertexCondition | None = None,
           gradient: str = "centered") -> float:
    """``1/2 ||psi'||^2 - ||psi||_{2mu+2}^{2mu+2} / (2mu+2) + vertex term / 2``.

    ``cond`` defaults to ``Delta(params.alpha)``.  ``gradient="cell"`` uses
    forward differences, which makes the kinetic part the exact quadratic
    form of the time-stepping operator.
    """
    p = 2.0 * params.mu + 2.0
    return (
        0.5 * _kinetic(f, gradient)
        - lp_norm(f, p) ** p / p
        + 0.5 * _vertex_term(f, params, cond)
    )


def action(f: GraphFunction, omega: float, params: NLSParams,
           cond: VertexCondition | None = None) -> float:
    return energy(f, params, cond) + 0.5 * omega * mass(f)


def nehari(f: GraphFunction, omega: float, params: NLSParams,
           cond: VertexCondition | None = None) -> float:
    p = 2.0 * params.mu + 2.0
    return (
        h1_seminorm(f) ** 2
        - lp_norm(f, p) ** p
        + omega * mass(f)
        + _vertex_term(f, params, cond)
    )


def stationary_residual(f: GraphFunction, omega: float, params: NLSParams) -> float:
    """L2 norm over interior nodes of ``-f'' + omega f - |f|^(2mu) f``.

    The vertex condition is checked separately by ``vertex_residual``.
    """
    v = f.values
    h = f.grid.h
    inner = v[:, 1:-1]
    lap = (v[:, 2:] - 2.0 * inner + v[:, :-2]) / h**2
    res = -lap + omega * inner - np.abs(inner) ** (2.0 * params.mu) * inner
    return float(np.sqrt(h * np.sum(np.abs(res) ** 2)))


def runaway_state(params: NLSParams, omega: float, shift: float, grid) -> GraphFunction:
    """Trial state on a Kirchhoff star escaping along edge 1.

    A complete line soliton centered at ``shift`` lives on edges 1-2 (bump on
    edge 1, its tail on edge 2); every other edge carries the same tail, so
    the state is continuous at the vertex.
    """
    x = grid.x
    bump = half_soliton_profile(omega, params.mu, shift, x)
    tail = half_soliton_profile(omega, params.mu, -shift, x)
    values = np.vstack([bump] + [tail] * (grid.n_edges - 1))
    return GraphFunction(values, grid)
