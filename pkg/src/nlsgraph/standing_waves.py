"""Closed-form stationary states of the focusing power NLS on a star graph.

On each edge the amplitude is a piece of the half-line soliton

    phi(a; x) = [(mu+1) omega]^(1/(2 mu)) sech^(1/mu)(mu sqrt(omega) (x - a)),

shifted so that the vertex condition holds.  With a delta vertex of strength
``alpha`` the state with ``j`` bumps puts ``phi(+a)`` on edges ``1..j`` and
``phi(-a)`` on the remaining ones, where

    tanh(mu sqrt(omega) a) (2j - N) = alpha / sqrt(omega).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import (
    BranchError,
    ConstraintError,
    DomainError,
    FrequencyError,
    NoSolutionError,
    UnsupportedError,
)
from .graph_core import GraphFunction, StarGrid

TAIL_WARN = 1e-10


@dataclass(frozen=True)
class NLSParams:
    """Star with ``n_edges`` edges, nonlinearity ``-|z|^(2 mu)``, delta strength ``alpha``."""

    n_edges: int
    mu: float = 1.0
    alpha: float = 0.0

    def __post_init__(self):
        if int(self.n_edges) != self.n_edges or self.n_edges < 2:
            raise DomainError(f"n_edges must be an integer >= 2, got {self.n_edges}")
        if not self.mu > 0:
            raise DomainError(f"mu must be positive, got {self.mu}")


@dataclass(frozen=True)
class StationaryState:
    params: NLSParams
    omega: float
    n_bumps: int
    shift: float
    kirchhoff_shift: float | None = None

    @property
    def centers(self) -> np.ndarray:
        """Soliton center on each edge (positive: bump, negative: tail)."""
        n = self.params.n_edges
        if self.kirchhoff_shift is not None:
            a = self.kirchhoff_shift
            half = n // 2
            return np.array([-a] * half + [a] * (n - half))
        j, a = self.n_bumps, self.shift
        return np.array([a] * j + [-a] * (n - j))

    @property
    def threshold(self) -> float:
        return branch_threshold(self.params, self.n_bumps)


def _check_profile_args(omega, mu):
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")


def half_soliton_profile(omega: float, mu: float, a: float, x):
    """Half-line soliton centered at ``a``; vectorized over ``x``."""
    _check_profile_args(omega, mu)
    amp = ((mu + 1.0) * omega) ** (1.0 / (2.0 * mu))
    arg = mu * math.sqrt(omega) * (np.asarray(x, dtype=float) - a)
    # sech^(1/mu) written through exp to avoid overflow of cosh
    s = np.abs(arg)
    sech = 2.0 * np.exp(-s) / (1.0 + np.exp(-2.0 * s))
    return amp * sech ** (1.0 / mu)


def branch_threshold(params: NLSParams, j: int) -> float:
    """Frequencies must exceed ``alpha^2 / (N - 2j)^2``."""
    n = params.n_edges
    if params.alpha == 0:
        return 0.0
    return params.alpha**2 / (n - 2 * j) ** 2


def admissible_bump_counts(params: NLSParams) -> frozenset[int] | None:
    """Bump counts carrying a branch of states; ``None`` flags the Kirchhoff case."""
    n, alpha = params.n_edges, params.alpha
    if alpha < 0:
        return frozenset(range(0, (n - 1) // 2 + 1))
    if alpha > 0:
        return frozenset(range(n // 2 + 1, n + 1))
    return None


def build_state(params: NLSParams, omega: float, j: int) -> StationaryState:
    if params.alpha == 0:
        if j != 0:
            raise BranchError("Kirchhoff vertex: use kirchhoff_state")
        return kirchhoff_state(params, omega, 0.0)
    counts = admissible_bump_counts(params)
    if j not in counts:
        raise BranchError(
            f"j={j} is not admissible for N={params.n_edges}, alpha={params.alpha}: "
            f"allowed {sorted(counts)}"
        )
    thr = branch_threshold(params, j)
    if not omega > thr:
        raise FrequencyError(
            f"omega={omega} must exceed alpha^2/(N-2j)^2 = {thr} on branch j={j}"
        )
    root = math.sqrt(omega)
    a = math.atanh(params.alpha / ((2 * j - params.n_edges) * root)) / (params.mu * root)
    return StationaryState(params, float(omega), int(j), a)


def kirchhoff_state(params: NLSParams, omega: float, a: float = 0.0) -> StationaryState:
    if params.alpha != 0:
        raise ConstraintError("kirchhoff_state needs alpha = 0")
    if not omega > 0:
        raise FrequencyError(f"omega must be positive, got {omega}")
    n = params.n_edges
    if n % 2:
        if a != 0:
            raise ConstraintError(f"odd N={n}: the Kirchhoff stationary state requires a = 0")
        return StationaryState(params, float(omega), 0, 0.0)
    return StationaryState(params, float(omega), n // 2, abs(a), kirchhoff_shift=float(a))


def sample(state: StationaryState, grid: StarGrid) -> GraphFunction:
    p = state.params
    if grid.n_edges != p.n_edges:
        raise ConstraintError(f"grid has {grid.n_edges} edges, state has {p.n_edges}")
    x = grid.x
    values = np.array(
        [half_soliton_profile(state.omega, p.mu, c, x) for c in state.centers]
    )
    tail = np.max(values[:, -1])
    if tail > TAIL_WARN:
        warnings.warn(
            f"state does not decay on [0, {grid.edge_length}]: boundary value {tail:.2e}",
            stacklevel=2,
        )
    return GraphFunction(values, grid)


# ---------------------------------------------------------------------------
# masses and energies


def _profile_integral(lower: float, mu: float) -> float:
    """``int_lower^1 (1 - t^2)^(1/mu - 1) dt``; the endpoint singularity is weighted exactly."""
    p = 1.0 / mu - 1.0
    if lower >= 1.0:
        return 0.0
    # s = 1 - t puts the singular endpoint at 0, where short intervals keep full resolution
    val, _ = integrate.quad(
        lambda s: (2.0 - s) ** p, 0.0, 1.0 - lower, weight="alg", wvar=(p, 0.0),
        epsabs=1e-13, epsrel=1e-13, limit=200,
    )
    return val


def profile_constant(mu: float) -> float:
    """``I(mu) = int_0^1 (1 - t^2)^(1/mu - 1) dt``."""
    return _profile_integral(0.0, mu)


def _mass(params: NLSParams, j: int, omega: float) -> float:
    n, mu = params.n_edges, params.mu
    pref = (mu + 1.0) ** (1.0 / mu) / mu * omega ** (1.0 / mu - 0.5)
    if params.alpha == 0:
        return pref * n * profile_constant(mu)
    c = abs(params.alpha) / ((n - 2 * j) * math.sqrt(omega))
    return pref * ((n - 2 * j) * _profile_integral(c, mu) + 2 * j * profile_constant(mu))


def mass_closed_form(state: StationaryState) -> float:
    p = state.params
    if p.alpha > 0:
        raise UnsupportedError("closed-form mass is available for alpha <= 0 only")
    return _mass(p, state.n_bumps, state.omega)


def _require_cubic(params: NLSParams):
    if params.mu != 1:
        raise UnsupportedError(f"closed form available for mu = 1 only, got mu={params.mu}")


def cubic_omega_star(params: NLSParams, m: float) -> float:
    """Common frequency at which every cubic branch has mass ``m``."""
    _require_cubic(params)
    if not m > 0:
        raise DomainError(f"mass must be positive, got {m}")
    return (m + 2.0 * abs(params.alpha)) ** 2 / (4.0 * params.n_edges**2)


def energy_closed_form_cubic(params: NLSParams, m: float, j: int) -> float:
    _require_cubic(params)
    if params.alpha > 0:
        raise DomainError("cubic energy formula is stated for alpha <= 0")
    if params.alpha == 0:
        if j != 0:
            raise BranchError("Kirchhoff vertex carries only j = 0 here")
    elif j not in admissible_bump_counts(params):
        raise BranchError(f"j={j} is not admissible for alpha < 0, N={params.n_edges}")
    omega = cubic_omega_star(params, m)
    if params.alpha != 0 and not omega > branch_threshold(params, j):
        raise FrequencyError(f"no j={j} state has mass {m}")
    n, a = params.n_edges, abs(params.alpha)
    return -((m + 2 * a) ** 3) / (24.0 * n**2) + a**3 / (3.0 * (2 * j - n) ** 2)


def branch_minimum_mass(params: NLSParams, j: int) -> float:
    """Infimum of the mass along branch ``j`` (attained as omega decreases to the threshold)."""
    if params.alpha == 0:
        return 0.0 if params.mu < 2 else _mass(params, j, 1.0)
    thr = branch_threshold(params, j)
    return _mass(params, j, thr * (1.0 + 1e-12))


def solve_omega_for_mass(params: NLSParams, j: int, m: float, rtol: float = 1e-13) -> float:
    """Invert the increasing map omega -> M[Phi_omega^j] by bisection.

    For ``mu = 2`` the map is increasing but bounded, so masses at or above
    its supremum have no solution.
    """
    if params.mu > 2:
        raise UnsupportedError("mass is not monotone in omega for mu > 2")
    if params.mu == 2 and params.alpha == 0:
        raise UnsupportedError("mass does not depend on omega for mu = 2 at a Kirchhoff vertex")
    if params.alpha > 0:
        raise UnsupportedError("closed-form mass is available for alpha <= 0 only")
    if params.alpha < 0 and j not in admissible_bump_counts(params):
        raise BranchError(f"j={j} not admissible")
    if params.alpha == 0 and j != 0:
        raise BranchError("Kirchhoff vertex carries only j = 0 here")
    mmin = branch_minimum_mass(params, j)
    if not m > mmin:
        raise NoSolutionError(
            f"mass {m} is not above the minimal mass {mmin:.12g} of branch j={j}", mmin
        )
    thr = branch_threshold(params, j)
    if thr > 0:
        lo = thr * (1.0 + 1e-12)
        hi = thr * 10.0
    else:
        lo, hi = 1.0, 1.0
        while _mass(params, j, lo) >= m:
            lo /= 10.0
    for _ in range(60):
        if _mass(params, j, hi) >= m:
            break
        hi *= 10.0
    else:
        raise NoSolutionError(f"mass {m} is not below the supremum of branch j={j}", mmin)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if _mass(params, j, mid) < m:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)


def critical_mass(params: NLSParams) -> float:
    """Mass threshold below which the N-tail state minimizes the energy.

    For ``mu = 2`` the returned bound is ``min(m*, pi sqrt(3) N / 4)``.
    """
    mu, n, alpha = params.mu, params.n_edges, params.alpha
    if not alpha < 0:
        raise DomainError("critical mass is defined for alpha < 0")
    if not 0 < mu <= 2:
        raise DomainError(f"critical mass needs 0 < mu <= 2, got {mu}")
    mstar = (
        2.0 * (mu + 1.0) ** (1.0 / mu) / mu
        * (abs(alpha) / n) ** ((2.0 - mu) / mu)
        * profile_constant(mu)
    )
    if mu == 2:
        return min(mstar, math.pi * math.sqrt(3.0) * n / 4.0)
    return mstar


def travelling_wave_even_kirchhoff(params: NLSParams, omega: float, a: float, v: float,
                                   t: float, grid: StarGrid, theta: float = 0.0) -> GraphFunction:
    """Exact travelling solution on a Kirchhoff star with an even number of edges.

    Edges ``1..N/2`` and ``N/2+1..N`` are paired into fictitious lines with
    coordinate ``X = -x`` and ``X = +x``; the line soliton centered at
    ``a + v t`` carries the Galilei phase ``exp(i (v X/2 - v^2 t/4 + omega t + theta))``.
    """
    n = params.n_edges
    if n % 2:
        raise UnsupportedError("travelling waves need an even number of edges")
    if params.alpha != 0:
        raise ConstraintError("travelling waves need a Kirchhoff vertex")
    if grid.n_edges != n:
        raise ConstraintError("grid/params edge count mismatch")
    x = grid.x
    center = a + v * t
    values = np.empty(grid.shape, dtype=complex)
    for i in range(n):
        sign = -1.0 if i < n // 2 else 1.0
        xl = sign * x
        phase = np.exp(1j * (0.5 * v * xl - 0.25 * v * v * t + omega * t + theta))
        values[i] = phase * half_soliton_profile(omega, params.mu, center, xl)
    return GraphFunction(values, grid)
