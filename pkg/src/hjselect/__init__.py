"""Staggered finite differences for periodic conservation laws.

The package builds the pieces in dependency order: Hamiltonian presets
(model), the space-time lattice (grid), the two coupled update rules
(scheme), cell-problem solves for the effective Hamiltonian (effective),
the controlled-walk representation of those updates (walk, bellman),
minimizing periodic orbits and the mesh-ratio criterion that ranks them
(orbits), reference profiles, numeric action barriers and transition
detection (barrier), and the refinement experiments that put it all
together (experiment).  The command line lives in cli.
"""
from .barrier import (AmbiguousFit, BarrierField, DetectionReport,
                      InvalidChoice, ManifoldEscape, NoSeparatrix,
                      NotStabilized, ReferenceProfile, SeparatrixData,
                      attempt_forced_separatrix, chebyshev_velocities,
                      compute_separatrix, construct_reference,
                      detect_transitions, peierls_numeric, peierls_one_step,
                      reference_for_c)
from .bellman import (BoundViolation, DualityMismatch, ExpectationCheck,
                      bellman_one_step, control_field_on_cone,
                      minimizing_control, value_multistep, verify_lax_oleinik)
from .effective import (NoConvergence, PeriodicSolution, rate_study,
                        rotation_number, scheme_residual, seed_from_profile,
                        solve_periodic)
from .experiment import (SelectionReport, compare_viscosity,
                         lambda_sweep, run_hyperbolic_ladder)
from .grid import GridField, MeshSpec, Parity
from .model import (HamiltonianModel, TrigPoly, check_tonelli, legendre,
                    make_model)
from .orbits import (NewtonDiverged, NotHyperbolic, NotPeriodic, OrbitData,
                     RiccatiBlowup, RiccatiData, SelectionIntegrals,
                     SelectionPrediction, find_orbits, lambda_crossing,
                     orbit_report, predict_selection, refine_orbit,
                     riccati_unstable, selection_integrals)
from .scheme import (CflViolation, CflWarning, SmoothField, cfl_margin,
                     default_probe_field, diffusive_lf_run, hj_step_v,
                     lf_step_u, slope_of_v, t_of_level, truncation_probe)
from .walk import (Cone, ConeDistribution, ControlField, InvalidPath,
                   JointStateOverflow, LipschitzReport, LipschitzViolated,
                   compensated_statistics, marginals_dp, path_density,
                   sample_paths, variance_under_lipschitz)

__version__ = "0.1.0"

__all__ = [
    "AmbiguousFit", "BarrierField", "BoundViolation", "CflViolation",
    "CflWarning", "Cone", "ConeDistribution", "ControlField",
    "DetectionReport", "DualityMismatch", "ExpectationCheck", "GridField",
    "HamiltonianModel", "InvalidChoice", "InvalidPath", "JointStateOverflow",
    "LipschitzReport", "LipschitzViolated", "ManifoldEscape", "MeshSpec",
    "NewtonDiverged", "NoConvergence", "NoSeparatrix", "NotHyperbolic",
    "NotPeriodic", "NotStabilized", "OrbitData", "Parity",
    "PeriodicSolution", "ReferenceProfile", "RiccatiBlowup", "RiccatiData",
    "SelectionIntegrals", "SelectionPrediction", "SelectionReport",
    "SeparatrixData", "SmoothField", "TrigPoly",
    "attempt_forced_separatrix", "bellman_one_step", "cfl_margin",
    "check_tonelli", "chebyshev_velocities", "compare_viscosity",
    "compensated_statistics", "compute_separatrix", "construct_reference",
    "control_field_on_cone", "default_probe_field", "detect_transitions",
    "diffusive_lf_run", "find_orbits", "hj_step_v", "lambda_crossing",
    "lambda_sweep", "legendre", "lf_step_u", "make_model", "marginals_dp",
    "minimizing_control", "orbit_report", "path_density", "peierls_numeric",
    "peierls_one_step", "predict_selection", "rate_study", "reference_for_c",
    "refine_orbit", "riccati_unstable", "rotation_number",
    "run_hyperbolic_ladder", "sample_paths", "scheme_residual",
    "seed_from_profile", "selection_integrals", "slope_of_v",
    "solve_periodic", "t_of_level", "truncation_probe", "value_multistep",
    "verify_lax_oleinik",
]
