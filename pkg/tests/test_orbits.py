"""Periodic orbits, curvature calibration, and the mesh-ratio ranking."""
import dataclasses
import json
import math

import numpy as np
import pytest

from hjselect import (
    NewtonDiverged,
    NotHyperbolic,
    find_orbits,
    lambda_crossing,
    make_model,
    orbit_report,
    predict_selection,
    refine_orbit,
    riccati_unstable,
    selection_integrals,
)
from hjselect.orbits import SelectionIntegrals

# curvature of the double-well potential at its two wells
CURV_LEFT = 16.0 * math.pi**2 * 0.07    # x = 0, depth + split
CURV_RIGHT = 16.0 * math.pi**2 * 0.13   # x = 1/2, depth - split


def _circular_gap(a, b):
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


@pytest.fixture(scope="module")
def two_well_orbits():
    model = make_model("two_well")
    return model, find_orbits(model)


def test_double_well_has_two_hyperbolic_rest_orbits(two_well_orbits):
    _, orbits = two_well_orbits
    assert len(orbits) == 2
    assert _circular_gap(orbits[0].x0, 0.0) <= 1e-8
    assert _circular_gap(orbits[1].x0, 0.5) <= 1e-8
    for orb in orbits:
        assert abs(orb.p0) <= 1e-10
        assert orb.winding == 0
        assert orb.hyperbolic
        assert orb.shoot_residual <= 1e-12


def test_monodromy_determinant_is_one(two_well_orbits):
    _, orbits = two_well_orbits
    for orb in orbits:
        m0, m1 = orb.multipliers
        assert abs(m0.imag) <= 1e-12 and abs(m1.imag) <= 1e-12
        assert abs(m0.real * m1.real - 1.0) <= 1e-8


def test_riccati_curvature_equals_root_of_well_curvature(two_well_orbits):
    model, orbits = two_well_orbits
    for orb, curv in zip(orbits, (CURV_LEFT, CURV_RIGHT)):
        rd = riccati_unstable(orb, model)
        assert abs(rd.w0 - math.sqrt(curv)) <= 1e-8
        # a rest orbit carries constant curvature
        assert np.max(rd.w) - np.min(rd.w) <= 1e-7
        assert rd.periodic_defect <= 1e-8 * (1.0 + abs(rd.w0))


def test_selection_integrals_of_rest_orbits(two_well_orbits):
    model, orbits = two_well_orbits
    for orb, curv in zip(orbits, (CURV_LEFT, CURV_RIGHT)):
        si = selection_integrals(orb, model)
        assert abs(si.gamma_tilde - orb.q * math.sqrt(curv)) <= 1e-8
        # no explicit time dependence, so the time part vanishes
        assert abs(si.t_integral) <= 1e-8
        assert si.quad_error <= 1e-8
        assert abs(si.gamma(0.5) - si.gamma_tilde) <= 1e-7


def test_single_well_calibration_is_pi():
    model = make_model("one_well")
    orbits = find_orbits(model)
    assert len(orbits) == 1
    si = selection_integrals(orbits[0], model)
    assert abs(si.gamma_tilde - math.pi) <= 1e-8


def test_prediction_margin_and_ties(two_well_orbits):
    model, orbits = two_well_orbits
    ints = [selection_integrals(o, model) for o in orbits]
    pred = predict_selection(ints, 0.5)
    assert pred.winner == 0 and not pred.tie
    assert pred.margin == pytest.approx(
        math.sqrt(CURV_RIGHT) - math.sqrt(CURV_LEFT), abs=1e-6)
    solo = predict_selection(ints[:1], 0.5)
    assert solo.winner == 0 and solo.margin == np.inf and not solo.tie
    twin = SelectionIntegrals(orbit=orbits[0], gamma_tilde=1.0,
                              t_integral=0.0, quad_error=0.0)
    tied = predict_selection([twin, twin], 0.5)
    assert tied.tie and tied.margin == 0.0
    # equal-rate pair never swaps rank
    assert lambda_crossing(ints[0], ints[1]) is None


def test_drift_model_rank_flip():
    model = make_model("flip_drift")
    orbits = find_orbits(model)
    assert len(orbits) == 2
    assert _circular_gap(orbits[0].x0, 0.0) <= 1e-6
    assert _circular_gap(orbits[1].x0, 0.5) <= 1e-6
    s0, s1 = (selection_integrals(o, model) for o in orbits)
    assert s0.gamma_tilde == pytest.approx(3.27690854, abs=2e-6)
    assert s1.gamma_tilde == pytest.approx(3.81156893, abs=2e-6)
    assert s0.t_integral == pytest.approx(0.58984354, abs=2e-6)
    assert s1.t_integral == pytest.approx(3.23041431, abs=2e-6)
    lam_star = lambda_crossing(s0, s1)
    assert lam_star == pytest.approx(0.44997677310328693, abs=1e-7)
    assert predict_selection([s0, s1], 0.9 * lam_star).winner == 0
    assert predict_selection([s0, s1], 1.1 * lam_star).winner == 1


def test_free_flow_has_no_isolated_orbits():
    assert find_orbits(make_model("free")) == []
    # a drifting start sees the singular shooting Jacobian of shear flow
    with pytest.raises(NewtonDiverged):
        refine_orbit(make_model("free"), 0.3, 0.4)


def test_riccati_demands_hyperbolicity(two_well_orbits):
    model, orbits = two_well_orbits
    soft = dataclasses.replace(orbits[0], hyperbolic=False, trace=1.5)
    with pytest.raises(NotHyperbolic):
        riccati_unstable(soft, model)


def test_orbit_report_is_plain_json(two_well_orbits):
    model, orbits = two_well_orbits
    ints = [selection_integrals(o, model) for o in orbits]
    rows = json.loads(orbit_report(ints, [0.3, 0.5]))
    assert len(rows) == 2
    for row in rows:
        assert row["lam_grid"] == [0.3, 0.5]
        assert len(row["gamma"]) == 2
        assert all(isinstance(m, float) for m in row["multipliers"])
