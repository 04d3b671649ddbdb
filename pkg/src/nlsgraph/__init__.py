"""Nonlinear Schroedinger equation on metric star graphs.

Standing waves and their functionals, linear stability, conservative time
stepping, and fast-soliton scattering through the vertex.
"""

from __future__ import annotations

from .errors import (
    BlowUpError,
    BranchError,
    ConstraintError,
    DomainError,
    FrequencyError,
    NLSGraphError,
    NoSolutionError,
    ResolutionError,
    SetupError,
    ShapeError,
    SolverError,
    StepError,
    StepSizeError,
    UnsupportedError,
)
from .evolution import (
    EvolutionConfig,
    Integrator,
    Scheme,
    Trajectory,
    evolve,
    orbit_distance,
    orbital_stability_probe,
    step,
)
from .functionals import action, energy, mass, nehari, runaway_state, stationary_residual
from .graph_core import (
    Delta,
    DeltaPrimeS,
    GeneralU,
    GraphFunction,
    Kirchhoff,
    StarGrid,
    VertexCondition,
    h1_seminorm,
    inner_product,
    lp_norm,
    validate_unitary,
    vertex_residual,
)
from .scattering import (
    ScatteringReport,
    ScatteringSetup,
    incident_soliton,
    linear_coefficients,
    reference_interaction,
    reference_out,
    reference_pre,
    run_scattering,
)
from .stability import (
    LinearizedOperator,
    StabilityReport,
    Verdict,
    assemble_JL,
    assemble_L1,
    assemble_L2,
    classify_stability,
    eig_low,
    morse_index,
    vk_derivative,
)
from .standing_waves import (
    NLSParams,
    StationaryState,
    admissible_bump_counts,
    branch_threshold,
    build_state,
    critical_mass,
    cubic_omega_star,
    energy_closed_form_cubic,
    half_soliton_profile,
    kirchhoff_state,
    mass_closed_form,
    sample,
    solve_omega_for_mass,
    travelling_wave_even_kirchhoff,
)

__version__ = "0.1.0"
