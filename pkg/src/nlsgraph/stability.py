"""Linearization about stationary states and the orbital-stability checks.

Perturbing ``Psi = (Phi + W + iZ) e^{i omega t}`` gives ``d/dt (W, Z) = J L (W, Z)``
with ``L = diag(L1, L2)``,

    L1 = H_alpha + omega - (2 mu + 1) Phi^(2 mu),
    L2 = H_alpha + omega - Phi^(2 mu).

Matrices are assembled in the symmetric coordinates ``y = W^{1/2} u`` of the
finite-difference operator (see :mod:`nlsgraph.discretization`), so ``L1`` and
``L2`` are symmetric and their quadratic forms equal the discrete second
variation of the action.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as spla

from .discretization import StarOperator
from .errors import ResolutionError, SolverError, StepSizeError
from .graph_core import Delta, GraphFunction, StarGrid
from .standing_waves import (
    NLSParams,
    StationaryState,
    _mass,
    branch_threshold,
    build_state,
    sample,
)

MIN_POINTS = 16
EIG_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class LinearizedOperator:
    kind: str  # "L1", "L2" or "JL"
    matrix: sparse.csr_matrix
    state: StationaryState
    grid: StarGrid
    potential: np.ndarray | None = None  # omega - c |Phi|^(2 mu) per unknown
    star: StarOperator | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def to_function(self, y: np.ndarray) -> GraphFunction:
        """Map symmetric coordinates back to grid values."""
        return self.star.to_function(y / np.sqrt(self.star.weights))

    def from_function(self, f: GraphFunction) -> np.ndarray:
        return self.star.to_vector(f) * np.sqrt(self.star.weights)


def _assemble(state: StationaryState, grid: StarGrid, coeff: float, kind: str):
    if grid.n_points < MIN_POINTS:
        raise ResolutionError(f"need at least {MIN_POINTS} points per edge, got {grid.n_points}")
    p = state.params
    star = StarOperator(grid, Delta(p.alpha))
    phi = star.to_vector(sample(state, grid)).real
    potential = state.omega - coeff * np.abs(phi) ** (2.0 * p.mu)
    return LinearizedOperator(kind, star.symmetric_matrix(potential), state, grid, potential, star)


def assemble_L1(state: StationaryState, grid: StarGrid) -> LinearizedOperator:
    return _assemble(state, grid, 2.0 * state.params.mu + 1.0, "L1")


def assemble_L2(state: StationaryState, grid: StarGrid) -> LinearizedOperator:
    return _assemble(state, grid, 1.0, "L2")


def assemble_JL(state: StationaryState, grid: StarGrid) -> LinearizedOperator:
    """Hamiltonian linearization ``[[0, L2], [-L1, 0]]`` acting on ``(W, Z)``."""
    l1 = assemble_L1(state, grid)
    l2 = assemble_L2(state, grid)
    mat = sparse.bmat([[None, l2.matrix], [-l1.matrix, None]], format="csr")
    return LinearizedOperator("JL", mat, state, grid, None, l1.star)


# ---------------------------------------------------------------------------
# eigenvalues


def _lower_bound(op: LinearizedOperator) -> float:
    # Laplacian part is >= -alpha^2/N^2 (continuum); pad generously
    alpha = op.state.params.alpha
    n = op.grid.n_edges
    return float(np.min(op.potential) - 2.0 * alpha**2 / n**2 - 1.0)


def _check_residual(mat, vals, vecs):
    for i, lam in enumerate(vals):
        v = vecs[:, i]
        res = np.linalg.norm(mat @ v - lam * v)
        if res > EIG_RESIDUAL_TOL * np.linalg.norm(v) * max(1.0, abs(lam)):
            raise SolverError(f"eigenpair {i} has residual {res:.3e}", residual=float(res))


def eig_low(op: LinearizedOperator, k: int, backend: str = "iterative", sigma=None):
    """Low-lying eigenpairs.

    ``L1``/``L2``: the ``k`` algebraically smallest eigenvalues, ascending,
    with eigenvectors as GraphFunctions.  ``JL``: ``k`` eigenvalues nearest to
    ``sigma`` (default: a small positive real shift) ordered by decreasing
    real part, with eigenvectors as ``(W, Z)`` pairs.
    """
    if k > op.dim:
        raise ValueError(f"k={k} exceeds the matrix dimension {op.dim}")
    mat = op.matrix
    if op.kind in ("L1", "L2"):
        if backend == "dense":
            vals, vecs = linalg.eigh(mat.toarray(), subset_by_index=[0, k - 1])
        elif backend == "iterative":
            try:
                vals, vecs = spla.eigsh(mat.tocsc(), k=k, sigma=_lower_bound(op), which="LM",
                                        tol=1e-13, maxiter=10_000)
            except spla.ArpackNoConvergence as exc:
                raise SolverError(f"eigsh did not converge: {len(exc.eigenvalues)} of {k} "
                                  f"eigenvalues found") from exc
            order = np.argsort(vals)
            vals, vecs = vals[order], vecs[:, order]
        else:
            raise ValueError(f"unknown backend {backend!r}")
        _check_residual(mat, vals, vecs)
        return [(float(v), op.to_function(vecs[:, i])) for i, v in enumerate(vals)]

    if backend == "dense":
        vals, vecs = linalg.eig(mat.toarray())
        if sigma is not None:
            idx = np.argsort(np.abs(vals - sigma))[:k]
        else:
            idx = np.lexsort((np.abs(vals.imag), -vals.real))[:k]
    elif backend == "iterative":
        if sigma is None:
            sigma = 1e-3 * op.state.omega
        try:
            vals, vecs = spla.eigs(mat.tocsc(), k=k, sigma=sigma, which="LM", tol=1e-13,
                                   maxiter=10_000)
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"eigs did not converge: {len(exc.eigenvalues)} of {k} "
                              f"eigenvalues found") from exc
        idx = np.arange(len(vals))
    else:
        raise ValueError(f"unknown backend {backend!r}")
    vals, vecs = vals[idx], vecs[:, idx]
    order = np.lexsort((np.abs(vals.imag), -vals.real))
    vals, vecs = vals[order], vecs[:, order]
    _check_residual(mat, vals, vecs)
    half = op.dim // 2
    out = []
    for i, lam in enumerate(vals):
        w = op.star.to_values(vecs[:half, i] / np.sqrt(op.star.weights))
        z = op.star.to_values(vecs[half:, i] / np.sqrt(op.star.weights))
        out.append((complex(lam), (GraphFunction(w, op.grid), GraphFunction(z, op.grid))))
    return out


def count_eigenvalues_below(op: LinearizedOperator, shift: float) -> int:
    """Number of eigenvalues of ``L1``/``L2`` below ``shift``.

    Symmetric Gaussian elimination from the far ends of the edges toward the
    vertex creates no fill-in on a star, and by Sylvester's law of inertia the
    count of negative pivots equals the count of eigenvalues below the shift.
    """
    star = op.star
    n, ne = op.grid.n_edges, star.edge_len
    mat = op.matrix
    diag = mat.diagonal() - shift
    d = diag[1:].reshape(n, ne).copy()
    upper = mat.diagonal(1)
    off = np.stack([upper[1 + j * ne: (j + 1) * ne] for j in range(n)])
    negatives = 0
    for i in range(ne - 1, 0, -1):
        negatives += int(np.sum(d[:, i] < 0))
        d[:, i - 1] -= off[:, i - 1] ** 2 / d[:, i]
    negatives += int(np.sum(d[:, 0] < 0))
    row0 = mat.getrow(0).toarray().ravel()
    coupling = row0[star._first]
    pivot = diag[0] - np.sum(coupling**2 / d[:, 0])
    return negatives + int(pivot < 0)


def eigenvalue_tolerance(grid: StarGrid) -> float:
    return 10.0 * grid.h**2


@dataclass(frozen=True)
class MorseResult:
    index: int
    near_zero: int
    expected_kernel: int
    indeterminate: bool


def _l1_expected_kernel(params: NLSParams) -> int:
    # at alpha = 0 every sign pattern e with sum(e) = 0 gives a kernel vector e * phi'
    return params.n_edges - 1 if params.alpha == 0 else 0


def morse_analysis(state: StationaryState, grid: StarGrid) -> MorseResult:
    op = assemble_L1(state, grid)
    tol = eigenvalue_tolerance(grid)
    below = count_eigenvalues_below(op, -tol)
    near = count_eigenvalues_below(op, tol) - below
    expected = _l1_expected_kernel(state.params)
    return MorseResult(below, near, expected, near != expected)


def morse_index(state: StationaryState, grid: StarGrid) -> int:
    """Number of eigenvalues of ``L1`` below ``-10 h^2``."""
    return morse_analysis(state, grid).index


# ---------------------------------------------------------------------------
# Vakhitov-Kolokolov


def vk_derivative(params: NLSParams, j: int, omega: float, rel_step: float = 1e-6) -> float:
    """``d/d omega`` of the closed-form mass (central differences, one Richardson step)."""
    thr = branch_threshold(params, j)
    if omega - thr < 1e-5:
        raise StepSizeError(f"omega={omega} is within 1e-5 of the branch threshold {thr}")
    s = rel_step * omega

    def central(step):
        return (_mass(params, j, omega + step) - _mass(params, j, omega - step)) / (2.0 * step)

    return (4.0 * central(0.5 * s) - central(s)) / 3.0


def vk_root(params: NLSParams, j: int = 0, rel_step: float = 1e-6,
            omega_max_factor: float = 1e6, rtol: float = 1e-12) -> tuple[float, float] | None:
    """Bracket of the frequency where the VK derivative changes sign, or None."""
    thr = branch_threshold(params, j)
    base = max(thr, 1e-3)
    grid = base * np.geomspace(1.0 + 1e-2, omega_max_factor, 400)
    signs = [math.copysign(1.0, vk_derivative(params, j, w, rel_step)) for w in grid]
    for a, b, sa, sb in zip(grid[:-1], grid[1:], signs[:-1], signs[1:]):
        if sa != sb:
            lo, hi = float(a), float(b)
            break
    else:
        return None
    slo = math.copysign(1.0, vk_derivative(params, j, lo, rel_step))
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if math.copysign(1.0, vk_derivative(params, j, mid, rel_step)) == slo:
            lo = mid
        else:
            hi = mid
    return lo, hi


# ---------------------------------------------------------------------------
# classification


class Verdict(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class StabilityReport:
    verdict: Verdict
    omega: float
    n_bumps: int
    morse_index: int
    l1_near_zero: int
    l2_negative: int
    l2_near_zero: int
    l2_kernel_residual: float  # |lowest L2 eigenvalue|
    l2_second_eigenvalue: float
    vk_derivative: float
    mass: float
    ground_state_verdict: bool  # j = 0 and alpha < 0, where the verdict is established
    l2_state_residual: float = math.nan  # ||L2 Phi|| / ||Phi||
    notes: tuple[str, ...] = ()


def l2_state_residual(state: StationaryState, grid: StarGrid) -> float:
    """``||L2 Phi|| / ||Phi||`` in the discrete L2 norm.

    Interior rows contribute O(h^2); the vertex row has an O(h) local error
    on a cell of size h, so the total decays like h^1.5.
    """
    op = assemble_L2(state, grid)
    y = op.from_function(sample(state, grid))
    return float(np.linalg.norm(op.matrix @ y) / np.linalg.norm(y))


def classify_stability(params: NLSParams, j: int, omega: float, grid: StarGrid,
                       backend: str = "iterative") -> StabilityReport:
    state = build_state(params, omega, j)
    tol = eigenvalue_tolerance(grid)
    morse = morse_analysis(state, grid)
    l2 = assemble_L2(state, grid)
    l2_neg = count_eigenvalues_below(l2, -tol)
    l2_zero = count_eigenvalues_below(l2, tol) - l2_neg
    low = eig_low(l2, 2, backend=backend)
    vk = vk_derivative(params, j, omega)
    m = _mass(params, j, omega)

    notes = []
    scope = j == 0 and params.alpha < 0
    if not scope:
        notes.append("excited state or alpha >= 0: verdict not established")
    spectral_ok = (morse.index == 1 and not morse.indeterminate
                   and l2_neg == 0 and l2_zero == 1)
    if not spectral_ok:
        notes.append("spectral conditions not met or indeterminate")
        verdict = Verdict.UNDECIDED
    elif abs(vk) < 1e-8 * m:
        notes.append("VK derivative numerically zero")
        verdict = Verdict.UNDECIDED
    else:
        verdict = Verdict.STABLE if vk > 0 else Verdict.UNSTABLE
    return StabilityReport(
        verdict, float(omega), int(j), morse.index, morse.near_zero, l2_neg, l2_zero,
        abs(low[0][0]), low[1][0], float(vk), float(m), scope,
        l2_state_residual(state, grid), tuple(notes),
    )


def spectral_instability(state: StationaryState, grid: StarGrid, k: int = 6,
                         shifts=(0.05, 0.3, 1.0)) -> tuple[bool, complex]:
    """Look for a JL eigenvalue with real part above ``10 h^2``.

    Returns the flag and the eigenvalue of largest real part seen.
    """
    op = assemble_JL(state, grid)
    best = 0j
    for s in shifts:
        for lam, _ in eig_low(op, k, sigma=s * state.omega):
            if lam.real > best.real:
                best = lam
    return best.real > eigenvalue_tolerance(grid), best
