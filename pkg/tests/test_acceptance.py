"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the lines are printed as each
check finishes and repeated in the terminal summary.
"""

from __future__ import annotations

import math
import time
import warnings

import numpy as np
import pytest
from scipy.stats import unitary_group

from nlsgraph import (
    Delta,
    DeltaPrimeS,
    EvolutionConfig,
    GeneralU,
    Kirchhoff,
    NLSParams,
    ScatteringSetup,
    StarGrid,
    admissible_bump_counts,
    assemble_JL,
    branch_threshold,
    build_state,
    classify_stability,
    critical_mass,
    cubic_omega_star,
    eig_low,
    energy,
    energy_closed_form_cubic,
    evolve,
    kirchhoff_state,
    linear_coefficients,
    lp_norm,
    mass_closed_form,
    orbital_stability_probe,
    run_scattering,
    sample,
    solve_omega_for_mass,
    stationary_residual,
    travelling_wave_even_kirchhoff,
    vertex_residual,
)
from nlsgraph.scattering import delta_coefficients, matching_residual, scattering_matrix
from nlsgraph.standing_waves import _mass, branch_minimum_mass, profile_constant
from nlsgraph.stability import vk_root

pytestmark = pytest.mark.slow

N_EDGES = (2, 3, 4, 5)
ALPHAS = (-2.0, -1.0, -0.5)
MUS = (0.5, 1.0, 2.0)


def catalog(ground_only=False):
    """Every admissible branch on 10 frequencies 0.1, 0.2, ..., 1.0 above its threshold."""
    for n in N_EDGES:
        for alpha in ALPHAS:
            for mu in MUS:
                p = NLSParams(n, mu, alpha)
                for j in sorted(admissible_bump_counts(p)):
                    if ground_only and j:
                        continue
                    thr = branch_threshold(p, j)
                    for k in range(1, 11):
                        yield p, j, thr + 0.1 * k


def quiet_sample(state, grid):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sample(state, grid)


def grid_for(state, scale, h):
    return StarGrid.from_spacing(state.params.n_edges, scale / math.sqrt(state.omega), h)


# ---------------------------------------------------------------- 1


def test_criterion_1_catalog_residuals(report):
    h = 5e-3
    tol = 10 * h * h
    start = time.perf_counter()
    total, failures, worst = 0, [], (0.0, None)
    for p, j, omega in catalog():
        state = build_state(p, omega, j)
        f = quiet_sample(state, grid_for(state, 30.0, h))
        r = max(vertex_residual(f, Delta(p.alpha)), stationary_residual(f, omega, p))
        total += 1
        if r >= tol:
            failures.append((p, j, omega))
        if r > worst[0]:
            worst = (r, (p.n_edges, p.alpha, p.mu, j, round(omega, 3)))
    elapsed = time.perf_counter() - start

    # the residual of the worst state still converges at second order
    n, alpha, mu, j, omega = worst[1]
    state = build_state(NLSParams(n, mu, alpha), omega, j)
    coarse, fine = (
        max(vertex_residual(g, Delta(alpha)), stationary_residual(g, omega, state.params))
        for g in (quiet_sample(state, grid_for(state, 30.0, hh)) for hh in (2 * h, h))
    )
    ok = not failures and elapsed < 60
    report(1, ok, f"{total - len(failures)}/{total} states below 10h^2={tol:.1e}; "
                  f"worst {worst[0]:.2e} at (N, alpha, mu, j, omega)={worst[1]}, "
                  f"halving-h ratio {coarse / fine:.2f}; {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 2


def test_criterion_2_mass_formula(report):
    start = time.perf_counter()
    worst = 0.0
    total = 0
    for p, j, omega in catalog():
        state = build_state(p, omega, j)
        f = quiet_sample(state, grid_for(state, 40.0, 1e-3))
        quad = lp_norm(f, 2, "simpson") ** 2
        worst = max(worst, abs(quad / mass_closed_form(state) - 1.0))
        total += 1
    constants = {0.5: 2.0 / 3.0, 1.0: 1.0, 2.0: math.pi / 2.0}
    const_err = max(abs(profile_constant(mu) - c) for mu, c in constants.items())
    ok = worst < 1e-8 and const_err < 1e-13
    report(2, ok, f"max relative mass error {worst:.2e} over {total} states (tol 1e-8); "
                  f"I(mu) vs closed values {const_err:.1e}; {time.perf_counter() - start:.1f}s")
    assert ok


# ---------------------------------------------------------------- 3


def test_criterion_3_cubic_identities(report):
    start = time.perf_counter()
    inversion = 0.0
    for n in N_EDGES:
        for alpha in ALPHAS:
            p = NLSParams(n, 1.0, alpha)
            for j in admissible_bump_counts(p):
                for m in branch_minimum_mass(p, j) + np.geomspace(0.05, 50.0, 20):
                    w = solve_omega_for_mass(p, j, m)
                    inversion = max(inversion, abs(w / cubic_omega_star(p, m) - 1.0))

    p = NLSParams(3, 1.0, -1.0)
    formula = 0.0
    rates, fine_errs = [], []
    for m in (1.0, 2.0, 4.0):
        closed = energy_closed_form_cubic(p, m, 0)
        general = -m * (m * m + 6 * m * abs(p.alpha) + 12 * p.alpha**2) / (24 * p.n_edges**2)
        formula = max(formula, abs(closed - general))
        state = build_state(p, cubic_omega_star(p, m), 0)
        errs = [abs(energy(quiet_sample(state, grid_for(state, 40.0, h)), p) - closed)
                for h in (1e-2, 5e-3)]
        rates.append(errs[0] / errs[1])
        fine_errs.append(errs[1])
    elapsed = time.perf_counter() - start
    ok = (inversion < 1e-10 and formula < 1e-14
          and all(3.5 < r < 4.5 for r in rates) and elapsed < 30)
    report(3, ok, f"inversion {inversion:.1e} (tol 1e-10); ground-state formula {formula:.1e}; "
                  f"energy error at h=5e-3 {max(fine_errs):.1e}, h-halving ratios "
                  f"{', '.join(f'{r:.2f}' for r in rates)}; {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------- 4


def branch_energy(p, j, m, h=5e-3):
    if p.mu == 1:
        return energy_closed_form_cubic(p, m, j)
    omega = solve_omega_for_mass(p, j, m)
    state = build_state(p, omega, j)
    return energy(quiet_sample(state, grid_for(state, 40.0, h)), p)


def test_criterion_4_ordering_and_threshold(report):
    below_checked, coexist_checked, violations = 0, 0, []
    for n in (3, 4, 5):
        for alpha in ALPHAS:
            for mu in MUS:
                p = NLSParams(n, mu, alpha)
                counts = sorted(admissible_bump_counts(p))
                mstar = critical_mass(p)
                # below m* only branches whose minimum mass is smaller coexist
                for m in mstar * np.array([0.25, 0.5, 1.0]):
                    alive = [j for j in counts if branch_minimum_mass(p, j) < m]
                    energies = [branch_energy(p, j, m) for j in alive]
                    below_checked += 1
                    if alive[:1] != [0] or np.any(np.diff(energies) <= 0):
                        violations.append((n, alpha, mu, m))
                # where every branch exists (for mu=2 the masses are bounded above)
                floor = max(branch_minimum_mass(p, j) for j in counts)
                ceiling = min(_mass(p, j, 1e12 * branch_threshold(p, j)) for j in counts)
                m = min(floor + 1.0, 0.5 * (floor + ceiling))
                energies = [branch_energy(p, j, m) for j in counts]
                coexist_checked += 1
                if np.any(np.diff(energies) <= 0):
                    violations.append((n, alpha, mu, m))
    symbolic = max(abs(critical_mass(NLSParams(n, 1.0, a)) - 4 * abs(a) / n)
                   for n in N_EDGES for a in np.linspace(-3.0, -0.1, 13))
    ok = not violations and symbolic < 1e-12
    report(4, ok, f"energy ordering in j: {below_checked} masses <= m* and {coexist_checked} "
                  f"masses with all branches present, {len(violations)} violations; "
                  f"m*(mu=1) vs 4|alpha|/N {symbolic:.1e}")
    assert ok


# ---------------------------------------------------------------- 5


def test_criterion_5_stability_suite(report):
    start = time.perf_counter()
    m_points = 2000
    bad, worst_kernel, worst_state = [], 0.0, 0.0
    count = 0
    for p, j, omega in catalog(ground_only=True):
        grid = StarGrid(p.n_edges, 30.0 / math.sqrt(omega), m_points)
        tol = 10 * grid.h**2
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = classify_stability(p, 0, omega, grid)
        count += 1
        worst_kernel = max(worst_kernel, rep.l2_kernel_residual / tol)
        worst_state = max(worst_state, rep.l2_state_residual / tol)
        if not (rep.morse_index == 1 and rep.l1_near_zero == 0 and rep.l2_negative == 0
                and rep.l2_near_zero == 1 and rep.l2_kernel_residual < tol
                and rep.vk_derivative > 0 and rep.verdict.value == "Stable"):
            bad.append((p, omega))

    drifts = []
    for n, alpha in ((3, -1.0), (4, -0.5), (5, -2.0)):
        p = NLSParams(n, 3.0, alpha)
        a = np.mean(vk_root(p, 0, rel_step=1e-6))
        b = np.mean(vk_root(p, 0, rel_step=5e-7))
        drifts.append(abs(a - b) / a)

    # JL: whole spectrum on a moderate grid, and the unstable pair at M=2000
    sym = 0.0
    for p, omega in ((NLSParams(3, 1.0, -1.0), 1.0), (NLSParams(3, 3.0, -1.0), 1.0)):
        state = build_state(p, omega, 0)
        op = assemble_JL(state, StarGrid(3, 30.0 / math.sqrt(omega), 200))
        vals = np.linalg.eigvals(op.matrix.toarray())
        for image in (-vals, np.conj(vals), -np.conj(vals)):
            d = np.abs(vals[:, None] - image[None, :]).min(axis=1).max()
            sym = max(sym, d / np.abs(vals).max())
    state = build_state(NLSParams(3, 3.0, -1.0), 1.0, 0)
    op = assemble_JL(state, StarGrid(3, 30.0, m_points))
    plus = max((lam for lam, _ in eig_low(op, 4, sigma=1.0)), key=lambda z: z.real)
    minus = min((lam for lam, _ in eig_low(op, 4, sigma=-1.0)), key=lambda z: z.real)
    pair = abs(plus + minus) / abs(plus)
    elapsed = time.perf_counter() - start

    ok = (not bad and max(drifts) < 1e-4 and sym < 1e-8 and pair < 1e-8 and elapsed < 600)
    report(5, ok, f"{count - len(bad)}/{count} ground states Stable with Morse index 1, simple L2 "
                  f"kernel (max |lambda_min|/10h^2 = {worst_kernel:.2f}; ||L2 Phi||/10h^2 up to "
                  f"{worst_state:.2f}), VK > 0; mu=3 VK bracket drift {max(drifts):.1e}; "
                  f"JL symmetry {sym:.1e}, unstable pair {plus.real:.4f} / {minus.real:.4f} "
                  f"mismatch {pair:.1e}; {elapsed:.0f}s")
    assert ok


# ---------------------------------------------------------------- 6


def conservation_cases(grid):
    tail = NLSParams(3, 1.0, -1.0)
    free = NLSParams(3, 1.0, 0.0)
    centered = quiet_sample(kirchhoff_state(free, 1.0, 0.0), grid)
    return [
        ("Delta(-1)", tail, Delta(-1.0), quiet_sample(build_state(tail, 1.0, 0), grid)),
        ("Kirchhoff", free, Kirchhoff(), centered),
        ("DeltaPrimeS(0.7)", free, DeltaPrimeS(0.7), centered),
    ]


def test_criterion_6_conservation(report):
    start = time.perf_counter()
    grid = StarGrid.from_spacing(3, 30.0, 1e-2)
    parts, ok = [], True
    for name, p, cond, phi in conservation_cases(grid):
        drifts = {}
        for dt in (1e-3, 5e-4):
            traj = evolve(phi, p, cond, EvolutionConfig(dt, 10.0, record_every=10))
            drifts[dt] = (traj.relative_drift("mass"), traj.relative_drift("energy"))
        m, e = drifts[1e-3]
        ratio = e / drifts[5e-4][1]
        ok &= m < 1e-10 and e < 1e-8 and 3.0 < ratio < 5.0
        parts.append(f"{name}: mass {m:.1e}, energy {e:.1e}, halving {ratio:.2f}")
    elapsed = time.perf_counter() - start
    report(6, ok, "; ".join(parts) + f"; {elapsed:.0f}s")
    assert ok


# ---------------------------------------------------------------- 7


def test_criterion_7_travelling_wave(report):
    p = NLSParams(4)
    constants = []
    for h, dt in ((2e-2, 2e-3), (1e-2, 1e-3)):
        grid = StarGrid.from_spacing(4, 30.0, h)
        psi0 = travelling_wave_even_kirchhoff(p, 1.0, -1.0, 2.0, 0.0, grid)
        traj = evolve(psi0, p, Kirchhoff(), EvolutionConfig(dt, 1.0, record_every=100))
        exact = travelling_wave_even_kirchhoff(p, 1.0, -1.0, 2.0, 1.0, grid)
        err = lp_norm(traj.final - exact)
        constants.append(err / ((grid.h**2 + dt**2) * lp_norm(exact)))
    ok = max(constants) < 5.0
    report(7, ok, "err / ((h^2 + dt^2) ||Phi||) = "
                  + ", ".join(f"{c:.3f}" for c in constants) + " at h=2e-2, 1e-2 (limit 5)")
    assert ok


# ---------------------------------------------------------------- 8


def test_criterion_8_orbital_probe(report):
    start = time.perf_counter()
    cfg = EvolutionConfig(2e-3, 20.0, record_every=50)

    def probe(mu, omega, size):
        grid = StarGrid.from_spacing(3, 30.0 / math.sqrt(omega), 0.02)
        return orbital_stability_probe(NLSParams(3, mu, -1.0), 0, omega, size, 20.0, grid, cfg,
                                       seed=7)

    stable = probe(1.0, 1.0, 1e-3)
    lo, hi = vk_root(NLSParams(3, 3.0, -1.0))
    unstable = probe(3.0, 1.0, 1e-4)
    ok = stable.ratio <= 5.0 and not stable.blew_up and unstable.ratio >= 10.0
    report(8, ok, f"mu=1: max/initial distance {stable.ratio:.2f} (limit 5); mu=3 at omega=1 > "
                  f"omega*={hi:.4f}: growth {unstable.ratio:.3g} (need >= 10)"
                  f"{', collapsed before t=20' if unstable.blew_up else ''}; "
                  f"{time.perf_counter() - start:.0f}s")
    assert ok


# ---------------------------------------------------------------- 9


def scattering_run(v, length):
    grid = StarGrid.from_spacing(3, length, 0.02)
    setup = ScatteringSetup(NLSParams(3), Kirchhoff(), v, 40.0, 0.5, grid,
                            EvolutionConfig(grid.h / (2 * v), 1.0, record_every=20))
    start = time.perf_counter()
    rep = run_scattering(setup)
    return rep, time.perf_counter() - start


@pytest.fixture(scope="module")
def headline():
    return scattering_run(20.0, 120.0)


def test_criterion_9_scattering_headline(report, headline):
    rep, elapsed = headline
    r = rep.final_ratios
    err = np.max(np.abs(r - np.array([1 / 3, 2 / 3, 2 / 3])))
    ok = (err < 0.05 and rep.partition_error < 1e-10 and abs(r[1] - r[2]) < 1e-10
          and not rep.boundary_flagged and elapsed <= 900)
    report(9, ok, f"v=20: r=({r[0]:.5f}, {r[1]:.5f}, {r[2]:.5f}), max deviation {err:.1e} "
                  f"(tol 0.05); partition {rep.partition_error:.1e}; r2-r3 {abs(r[1] - r[2]):.1e}; "
                  f"{elapsed:.0f}s")
    assert ok


def test_criterion_9_velocity_sweep(report, headline):
    # v=40 needs longer edges to keep the outgoing pulses away from x=L before t3
    runs = {10.0: scattering_run(10.0, 120.0)[0], 20.0: headline[0],
            40.0: scattering_run(40.0, 240.0)[0]}
    dev = [abs(runs[v].final_ratios[1] - 2 / 3) for v in sorted(runs)]
    clean = not any(rep.boundary_flagged for rep in runs.values())
    ok = dev[0] > dev[1] > dev[2] and clean
    report(9, ok, "velocity sweep |r2 - 2/3| at v=10, 20, 40: "
                  + ", ".join(f"{d:.2e}" for d in dev) + " (monotone decreasing)")
    assert ok


# ---------------------------------------------------------------- 10


def test_criterion_10_linear_coefficients(report):
    ks = np.geomspace(0.01, 50.0, 40)
    conditions = [Kirchhoff()] + [Delta(a) for a in (-3.0, -1.0, -0.2, 0.5, 2.0)]
    conditions += [DeltaPrimeS(b) for b in (-2.0, -0.3, 0.4, 1.5)]
    unitarity, matching, closed = 0.0, 0.0, 0.0
    for n in range(2, 7):
        conds = conditions + [GeneralU(unitary_group.rvs(n, random_state=10 + n))]
        for cond in conds:
            for k in ks:
                if isinstance(cond, GeneralU):
                    # transmissions differ per edge without permutation symmetry
                    column = scattering_matrix(cond, k, n)[:, 0]
                    unitarity = max(unitarity, abs(np.sum(np.abs(column) ** 2) - 1.0))
                    continue
                r, t = linear_coefficients(cond, k, n)
                unitarity = max(unitarity, abs(abs(r) ** 2 + (n - 1) * abs(t) ** 2 - 1.0))
                if isinstance(cond, Delta):
                    s = scattering_matrix(cond, k, n)[:, 0]
                    matching = max(matching, matching_residual(cond, k, n, s))
                    r0, t0 = delta_coefficients(cond.alpha, k, n)
                    closed = max(closed, abs(r - r0), abs(t - t0))
    ok = unitarity < 1e-14 and matching < 1e-14 and closed < 1e-14
    report(10, ok, f"unitarity defect {unitarity:.1e}, Delta matching residual {matching:.1e}, "
                   f"closed form {closed:.1e} (tol 1e-14)")
    assert ok
