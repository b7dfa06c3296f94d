"""Cell-problem solver: exact quadratic law, refinement rate, robustness."""
import numpy as np
import pytest

from hjselect import (
    CflViolation,
    MeshSpec,
    NoConvergence,
    make_model,
    rate_study,
    rotation_number,
    scheme_residual,
    seed_from_profile,
    solve_periodic,
)
from oracles import mech_effective, one_well_potential, two_well_potential

# (N, K) pairs covering the degenerate ratio lam = 1 and finer time steps
MESH_MATRIX = [(8, 8), (8, 16), (16, 16), (16, 64), (12, 20), (32, 32), (32, 64)]
SPEEDS = [0.0, 0.25, -0.7]
FAST = 1.3  # only meshes with lam <= 0.5 can carry this one


def test_free_effective_value_is_half_c_squared():
    model = make_model("free")
    worst = 0.0
    for N, K in MESH_MATRIX:
        mesh = MeshSpec(N, K)
        cs = SPEEDS + ([FAST] if mesh.lam <= 0.5 else [])
        for c in cs:
            sol = solve_periodic(model, mesh, c)
            worst = max(worst, abs(sol.h_delta - 0.5 * c * c))
            assert sol.converged
    assert worst <= 1e-12


def test_free_fast_speed_trips_the_cfl_guard_at_unit_ratio():
    # at lam = 1 a speed of 1.3 exceeds the cone bound; the stored pass
    # aborts unless the guard is switched off, and with flat rows the
    # value itself is still exact
    model = make_model("free")
    mesh = MeshSpec(8, 8)
    with pytest.raises(CflViolation):
        solve_periodic(model, mesh, FAST)
    sol = solve_periodic(model, mesh, FAST, cfl="off")
    assert sol.cfl_min_margin < 0.0
    assert abs(sol.h_delta - 0.5 * FAST * FAST) <= 1e-12


def test_two_well_refinement_toward_the_flat_interval():
    # c = 0.12 sits inside the flat part of the continuum effective
    # Hamiltonian, so the exact value is zero and the ladder measures
    # pure discretization error
    assert mech_effective(two_well_potential, 0.12) == 0.0
    model = make_model("two_well")
    study = rate_study(model, 0.12, 0.5, [32, 64, 128, 256],
                       h_exact=0.0, max_periods=4000)
    errs = study.errors
    assert all(e2 <= e1 * (1.0 + 1e-12) for e1, e2 in zip(errs, errs[1:]))
    assert study.alpha is not None and study.alpha >= 0.4
    # the finest level lands close to first order in dx
    assert 0.003 < errs[-1] < 0.009


def test_one_well_outside_the_plateau_matches_the_quadrature_value():
    model = make_model("one_well")
    c = 0.9
    h_star = mech_effective(one_well_potential, c)
    assert h_star > 0.0
    errs = []
    for N in (48, 96):
        mesh = MeshSpec(N, 2 * N)
        sol = solve_periodic(model, mesh, c, max_periods=2000)
        errs.append(abs(sol.h_delta - h_star))
        assert errs[-1] <= 5.0 * np.sqrt(mesh.dx)
    assert errs[1] < errs[0]


def test_seeding_does_not_move_the_fixed_point():
    model = make_model("two_well")
    mesh = MeshSpec(32, 64)
    sol_zero = solve_periodic(model, mesh, 0.12, max_periods=4000)
    seed = seed_from_profile(mesh, lambda x: 0.3 * np.sin(2 * np.pi * x))
    sol_prof = solve_periodic(model, mesh, 0.12, seed_row=seed, max_periods=4000)
    assert abs(sol_zero.h_delta - sol_prof.h_delta) <= 1e-8
    gap = np.max(np.abs(sol_zero.v_field.row(0) - sol_prof.v_field.row(0)))
    assert gap <= 1e-7


def test_stored_rows_reproduce_the_step_exactly():
    model = make_model("two_well")
    sol = solve_periodic(model, MeshSpec(24, 48), 0.12, max_periods=4000)
    assert sol.converged
    assert sol.residual_periodicity <= 1e-8
    assert sol.cfl_min_margin > 0.0
    assert scheme_residual(model, sol) <= 1e-15


def test_no_convergence_reports_periods_and_defect():
    model = make_model("two_well")
    with pytest.raises(NoConvergence) as ei:
        solve_periodic(model, MeshSpec(32, 64), 0.12, max_periods=2)
    assert ei.value.periods == 2
    assert ei.value.defect > 0.0


def test_rotation_number_of_the_free_model_is_the_speed():
    model = make_model("free")
    mesh = MeshSpec(16, 32)
    sol = solve_periodic(model, mesh, 0.25)
    rep = rotation_number(sol, model)
    # dh/dc = c exactly for the quadratic law, tracing has mesh error
    assert abs(rep.by_difference - 0.25) <= 1e-9
    assert abs(rep.by_characteristics - 0.25) <= 1e-6
    assert rep.agree


def test_effective_value_is_even_in_the_speed():
    # the potential is even in x, so mirroring maps the lattice to
    # itself and h_delta(c) = h_delta(-c) up to roundoff
    model = make_model("two_well")
    mesh = MeshSpec(16, 32)
    h_plus = solve_periodic(model, mesh, 0.8, max_periods=2000).h_delta
    h_minus = solve_periodic(model, mesh, -0.8, max_periods=2000).h_delta
    assert abs(h_plus - h_minus) <= 5e-9
