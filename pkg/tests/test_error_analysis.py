import csv
import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentopt.error_analysis import (
    DecisionStructureError,
    ZoneFlag,
    classify_zones,
    decision_errors,
    flag_counts,
    latent_errors,
    save_zone_flags_csv,
)
from latentopt.optimizers import (
    Costs,
    IterationLog,
    OptProblem,
    OptResult,
    Simulator,
    SolverConfig,
    cost,
    optsim_solve,
    project_actions,
)
from latentopt.thermal import DisturbanceProfile, Trajectory, generate_disturbances, simulate

from conftest import toy_building
from test_latent import identity_set


def problem(T=4, Z=2):
    b = toy_building(Z, kappa=0.3)
    d = generate_disturbances(DisturbanceProfile(seed=9), 1, Z)[40 : 40 + T]
    lo = np.full((T, Z), 23.0)
    return b, OptProblem(np.full(T, 0.1), 0.01, 10.0, lo, lo + 2, np.zeros((T, Z)), np.full((T, Z), 15.0), np.full(Z, 24.0), d)


def result_for(b, p, a_dec, method="optiden"):
    sim = Simulator(b)
    a_proj = project_actions(a_dec, p)
    s1 = simulate(b, p.s0, a_dec, p.disturbances)
    s2 = sim(p.s0, a_proj, p.actual_disturbances)
    return OptResult(method, a_dec, a_proj, s1, s2, cost(a_dec, s1, p), cost(a_proj, s2, p), IterationLog(), False, 0.0)


# latent errors


def test_identity_autoencoders_have_zero_reconstruction_errors():
    m = identity_set()
    rng = np.random.default_rng(0)
    traj = Trajectory(rng.uniform(size=(20, 1)), rng.uniform(size=(20, 1)), rng.uniform(size=(20, 3)))
    rep = latent_errors(m, traj)
    assert not rep.e_s.any() and not rep.e_a.any() and not rep.e_d.any()


def test_reconstruction_identity_on_trained_model(small_model, small_data):
    rep = latent_errors(small_model, small_data)
    assert np.abs(rep.identity_gap(small_model)).max() < 1e-9
    n = len(small_data.states) - 1
    assert all(x.shape[0] == n for x in (rep.e_s, rep.e_a, rep.e_d, rep.e_m, rep.e_m_latent))
    assert all(np.isfinite(v) for v in rep.summary().values())


def test_zero_latent_error_gives_equal_model_and_state_errors(small_model, small_data):
    rep = latent_errors(small_model, small_data)
    rep = dataclasses.replace(rep, e_m_latent=np.zeros_like(rep.e_m_latent))
    # with no latent error the model error is the state reconstruction error
    rep = dataclasses.replace(rep, e_m=rep.e_s.copy())
    assert np.abs(rep.identity_gap(small_model)).max() < 1e-12


# decision errors


def test_feasible_actions_have_zero_action_error():
    b, p = problem()
    rep = decision_errors(result_for(b, p, np.full((4, 2), 3.0)), p)
    assert not rep.e_a.any() and not rep.e_s.any() and rep.e == 0.0


def test_upper_branch_action_error():
    b, p = problem()
    a = np.full((4, 2), 3.0)
    a[1, 0] = 16.0
    rep = decision_errors(result_for(b, p, a), p)
    assert rep.e_a[1, 0] == -1.0 and np.count_nonzero(rep.e_a) == 1
    assert rep.to_dict()["clamped_entries"] == 1


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-30, 45), min_size=8, max_size=8))
def test_action_error_branches_are_exhaustive(vals):
    b, p = problem()
    a = np.array(vals).reshape(4, 2)
    rep = decision_errors(result_for(b, p, a), p)
    lower, upper = a < p.action_lower, a > p.action_upper
    interior = ~(lower | upper)
    assert ((lower.astype(int) + upper + interior) == 1).all()
    assert (rep.e_a[interior] == 0).all()
    np.testing.assert_array_equal(rep.e_a[lower], (p.action_lower - a)[lower])
    np.testing.assert_array_equal(rep.e_a[upper], (p.action_upper - a)[upper])
    res = result_for(b, p, a)
    recomputed = cost(res.projected_actions, res.actual_states, p).total - cost(res.decoded_actions, res.predicted_states, p).total
    assert abs(rep.e - recomputed) < 1e-9


def test_optsim_identity_and_structure_check(small_building, small_model, small_data):
    T = 5
    d = small_data.disturbances[:T]
    lo = np.full((T, 3), 22.0)
    p = OptProblem(np.full(T, 0.1), 0.001, 10.0, lo, lo + 3, np.zeros((T, 3)), np.full((T, 3), 15.0), small_data.states[0], d)
    sim = Simulator(small_building)
    res = optsim_solve(p, small_model, sim, SolverConfig(max_iter=5, step=1e-4))
    rep = decision_errors(res, p, sim)
    expected = sim(p.s0, res.projected_actions, d) - sim(p.s0, res.decoded_actions, d)
    assert np.array_equal(rep.e_s, expected)
    feasible = dataclasses.replace(res, projected_actions=res.decoded_actions, actual_states=res.predicted_states, act=res.dec)
    fr = decision_errors(feasible, p, sim)
    assert not fr.e_s.any() and abs(fr.e) < 1e-9
    broken = dataclasses.replace(res, actual_states=res.actual_states + 1e-3)
    with pytest.raises(DecisionStructureError):
        decision_errors(broken, p, sim)


# zone classifier


def _with_states(res, states):
    return dataclasses.replace(res, actual_states=states)


def test_classifier_examples():
    b, p = problem(T=1, Z=2)
    p.temp_penalty[:] = 1.0
    gt = result_for(b, p, np.zeros((1, 2)), "gt")
    gt = _with_states(gt, np.array([[26.0, 24.0]]))  # penalties 1 and 0
    assert all(f.flag == 0 for f in classify_zones({"gt": gt}, gt, p))
    # zone 0: 13*(1 + s) + 1 gives ratio 13 > 12; zone 1: 1e-7 above a zero baseline, ratio 0.1
    u0 = 13 * (1 + 1e-6) + 1
    other = _with_states(gt, np.array([[25.0 + np.sqrt(u0), 25.0 + np.sqrt(1e-7)]]))
    flags = classify_zones({"optiden": other}, gt, p)
    assert [f.flag for f in flags] == [1, 0]
    assert flags[0].penalty == pytest.approx(u0)
    assert flag_counts(flags) == {"optiden": 1}


def test_flags_csv(tmp_path):
    flags = [ZoneFlag(0, "oriiden", 0.5, 0), ZoneFlag(1, "oriiden", 2.0, 1)]
    path = tmp_path / "flags.csv"
    save_zone_flags_csv(flags, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["zone", "method", "penalty", "flag"]
    assert rows[2] == ["1", "oriiden", "2.0", "1"]


def test_costs_total():
    assert Costs(1.5, 2.0).total == 3.5
