"""Refinement experiments: verdict logic, determinism, thread equivalence."""
import numpy as np
import pytest

from hjselect import (
    compare_viscosity,
    lambda_sweep,
    make_model,
    run_hyperbolic_ladder,
)
from hjselect.experiment import LadderEntry, SelectionReport, _judge_ladder


def _report(entries, predicted=0, tie=False):
    rep = SelectionReport(model_name="synthetic", kind="ladder", c=0.0,
                          lam=0.5, predicted=predicted, tie=tie)
    rep.entries = entries
    return rep


def _entry(N, detected, sup=None, cause=None):
    return LadderEntry(N=N, K=2 * N, lam=0.5, detected=detected,
                       barrier_sup=sup, cause=cause)


def test_verdict_tie():
    rep = _report([_entry(32, (0,)), _entry(64, (0,))], tie=True)
    _judge_ladder(rep)
    assert rep.verdict == "inconclusive" and "tie" in rep.cause


def test_verdict_too_few_usable_levels():
    rep = _report([_entry(32, (), cause="NoConvergence: gave up"),
                   _entry(64, (0,))])
    _judge_ladder(rep)
    assert rep.verdict == "inconclusive"
    assert rep.cause.startswith("NoConvergence")


def test_verdict_confirmed_with_shrinking_barrier():
    rep = _report([_entry(32, (0,), 0.10), _entry(64, (0,), 0.05),
                   _entry(128, (0,), 0.02)])
    _judge_ladder(rep)
    assert rep.verdict == "confirmed" and rep.cause is None
    assert rep.barrier_monotone is True


def test_verdict_spoiled_by_growing_barrier():
    rep = _report([_entry(32, (0,), 0.02), _entry(64, (0,), 0.05),
                   _entry(128, (0,), 0.10)])
    _judge_ladder(rep)
    assert rep.verdict == "inconclusive"
    assert "barrier" in rep.cause
    assert rep.barrier_monotone is False


def test_verdict_refuted_when_finest_levels_agree_elsewhere():
    rep = _report([_entry(32, (0,)), _entry(64, (1,)), _entry(128, (1,))])
    _judge_ladder(rep)
    assert rep.verdict == "refuted" and "[1]" in rep.cause


def test_verdict_disagreeing_levels_stay_inconclusive():
    rep = _report([_entry(64, (0,)), _entry(128, (0, 1))])
    _judge_ladder(rep)
    assert rep.verdict == "inconclusive"
    assert "disagree or detect extra" in rep.cause


def test_single_orbit_ladder_confirms():
    lad = run_hyperbolic_ladder(make_model("one_well"), 0.0, 0.5,
                                n_ladder=(16, 32), delta=0.1)
    assert lad.verdict == "confirmed"
    assert lad.predicted == 0 and lad.margin == np.inf and not lad.tie
    sups = [e.barrier_sup for e in lad.entries]
    assert sups[1] < sups[0] < 0.1
    assert all(e.detected == (0,) and e.cause is None for e in lad.entries)
    payload = lad.as_dict()
    assert "wall_time" not in payload["entries"][0]
    assert payload["entries"][0]["detected"] == [0]


def test_thread_count_does_not_change_the_report():
    kw = dict(n_ladder=(16, 32), delta=0.1)
    serial = run_hyperbolic_ladder(make_model("one_well"), 0.0, 0.5, **kw)
    threaded = run_hyperbolic_ladder(make_model("one_well"), 0.0, 0.5,
                                     workers=2, **kw)
    assert serial.as_dict() == threaded.as_dict()


def test_ladder_collects_recoverable_causes():
    lad = run_hyperbolic_ladder(make_model("two_well"), 0.12, 0.5,
                                n_ladder=(16, 24), max_periods=1,
                                compute_barrier=False)
    assert lad.verdict == "inconclusive"
    assert all(e.cause is not None and e.cause.startswith("NoConvergence")
               for e in lad.entries)


def test_ladder_needs_orbits():
    with pytest.raises(ValueError, match="orbits"):
        run_hyperbolic_ladder(make_model("free"), 0.0, 0.5)


def test_sweep_without_crossing_confirms_uniform_detection():
    rep = lambda_sweep(make_model("two_well"), 0.12, [0.4, 0.6],
                       n_ladder=(32, 96))
    assert rep.verdict == "confirmed"
    rows = rep.extra["rows"]
    assert [r["detected"] for r in rows] == [[0], [0]]
    assert rep.extra["lam_crit"] is None          # equal-rate orbit pair
    assert rep.extra["flip_bracket"] is None
    assert rep.extra["small_lam_matches_diffusive"]


def test_viscous_run_detects_the_diffusive_winner():
    lad = run_hyperbolic_ladder(make_model("one_well"), 0.0, 0.5,
                                n_ladder=(16, 32), delta=0.1)
    vis = compare_viscosity(make_model("one_well"), 0.0, nu_ladder=(0.02,),
                            N=64, delta=0.1, max_periods=1200, hyperbolic=lad)
    assert vis.verdict == "confirmed"
    assert vis.extra["agrees"] and vis.extra["stable_under_halving"]
    assert vis.extra["diffusive_winner"] == 0
    assert vis.extra["hyperbolic"]["verdict"] == "confirmed"
    assert vis.extra["disagrees_with_hyperbolic"] is False
    entry = vis.entries[0]
    # diffusive scaling: K tracks 4 nu N^2, so the realized ratio shrinks
    assert entry.K == 328 and entry.lam == pytest.approx(64 / 328)
