import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentopt.thermal import (
    BuildingModel,
    DisturbanceProfile,
    SimulationError,
    ThermostatPolicy,
    Trajectory,
    add_noise,
    generate_dataset,
    generate_disturbances,
    load_trajectory_csv,
    make_desk_building,
    save_trajectory_csv,
    simulate,
    step,
)

from conftest import toy_building


def one_zone(kappa=0.0):
    return BuildingModel([2.0], [[0.0]], [0.1], [0.5], kappa=kappa)


def test_single_zone_equilibrium():
    assert step(one_zone(), [25.0], [0.0], [25.0, 0.0, 0.0])[0] == 25.0


def test_single_zone_cooling():
    assert step(one_zone(), [25.0], [1.0], [25.0, 0.0, 0.0])[0] == pytest.approx(25 - 0.25 * 3.6 / 2)


def test_two_zone_hand_evaluation():
    b = toy_building(2, conductance=0.2)
    d = np.array([25.0, 0.0, 0.0, 0.0, 0.0])
    s = np.array([26.0, 24.0])
    nxt = step(b, s, [0.0, 0.0], d)
    # conduction 0.2*(24-26) = -0.4, envelope 0.1*(25-26) = -0.1
    assert nxt[0] == pytest.approx(26 + 0.25 / 2 * (-0.4 - 0.1))
    assert nxt[1] == pytest.approx(24 + 0.25 / 2 * (0.4 + 0.1))


def test_nonlinear_envelope_term():
    b = one_zone(kappa=0.3)
    nxt = step(b, [20.0], [0.0], [30.0, 0.0, 0.0])[0]
    flux = 0.1 * 10 + 0.3 * 10 * 10 / 20
    assert nxt == pytest.approx(20 + 0.25 / 2 * flux)


def test_invalid_parameters():
    with pytest.raises(ValueError):
        BuildingModel([-1.0], [[0.0]], [0.1], [0.5])
    with pytest.raises(ValueError):
        BuildingModel([1.0, 1.0], [[0.0, 0.1], [0.2, 0.0]], [0.1, 0.1], [0.5, 0.5])
    with pytest.raises(ValueError):
        BuildingModel([0.1], [[0.0]], [1.0], [0.5])  # dt*U/C = 2.5


def test_step_rejects_nonfinite_and_bad_shapes():
    b = one_zone()
    with pytest.raises(SimulationError):
        step(b, [np.nan], [0.0], [25.0, 0.0, 0.0])
    with pytest.raises(SimulationError):
        step(b, [25.0, 1.0], [0.0], [25.0, 0.0, 0.0])


def test_simulate_reports_time_index():
    b = one_zone()
    d = np.tile([25.0, 0.0, 0.0], (4, 1))
    a = np.zeros((4, 1))
    a[2, 0] = np.inf
    with pytest.raises(SimulationError) as info:
        simulate(b, [25.0], a, d)
    assert info.value.time_index == 2


def test_simulate_t1_is_step_and_loop_matches_manual():
    rng = np.random.default_rng(3)
    b = make_desk_building(zones=4, seed=3)
    d = generate_disturbances(DisturbanceProfile(seed=3), 1, 4)[:8]
    a = rng.uniform(0, 15, (8, 4))
    s0 = rng.uniform(20, 28, 4)
    assert np.array_equal(simulate(b, s0, a[:1], d[:1])[0], step(b, s0, a[0], d[0]))
    s = s0
    for t in range(8):
        s = step(b, s, a[t], d[t])
        assert np.array_equal(simulate(b, s0, a, d)[t], s)


def test_isolated_adiabatic_zones_stay_constant():
    b = BuildingModel([2.0, 3.0], np.zeros((2, 2)), [0.0, 0.0], [0.5, 0.5], kappa=0.0)
    d = np.zeros((10, 5))
    d[:, 0] = 40.0
    out = simulate(b, [21.0, 23.0], np.zeros((10, 2)), d)
    assert np.array_equal(out, np.tile([21.0, 23.0], (10, 1)))


def test_linear_steady_state():
    b = toy_building(2, kappa=0.0, conductance=0.2)
    d_row = np.array([30.0, 2.0, 1.0, 0.5, 0.7])
    out = simulate(b, [20.0, 20.0], np.zeros((10000, 2)), np.tile(d_row, (10000, 1)))
    # 0 = U(s_j - s_i) + U_out (d_out - s_i) + g sol_i + occ_i
    M = np.array([[-0.3, 0.2], [0.2, -0.3]])
    rhs = -(0.1 * 30 + 0.5 * d_row[1:3] + d_row[3:5])
    np.testing.assert_allclose(out[-1], np.linalg.solve(M, rhs), atol=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2), st.floats(0.0, 15.0), st.floats(0.01, 5.0), st.integers(0, 10_000))
def test_energy_sign_and_outdoor_monotonicity(zone, base, bump, seed):
    rng = np.random.default_rng(seed)
    b = make_desk_building(zones=3, seed=seed % 5)
    s = rng.uniform(18, 32, 3)
    a = np.full(3, base)
    d = np.concatenate([[rng.uniform(20, 35)], rng.uniform(0, 10, 6)])
    ref = step(b, s, a, d)
    a2 = a.copy()
    a2[zone] += bump
    assert step(b, s, a2, d)[zone] <= ref[zone]
    d2 = d.copy()
    d2[0] += 1.0
    assert (step(b, s, a, d2) > ref).all()


def test_disturbances_shape_determinism_and_ranges():
    p = DisturbanceProfile(seed=5)
    d1 = generate_disturbances(p, 3, 12)
    assert d1.shape == (288, 25)
    assert np.array_equal(d1, generate_disturbances(p, 3, 12))
    assert (d1[:, 0] >= 20).all() and (d1[:, 0] <= 35).all()
    midnight = np.arange(0, 288, 96)
    assert (d1[midnight, 1:13] == 0).all()
    assert (d1[:, 1:] >= 0).all()
    with pytest.raises(ValueError):
        generate_disturbances(p, 0, 12)


def test_dataset_layout():
    traj = generate_dataset(make_desk_building(), DisturbanceProfile(), 61)
    assert traj.states.shape == (5856, 12) and traj.disturbances.shape == (5856, 25)
    assert (traj.actions >= 0).all()


def test_thermostat_never_triggers_gives_dither_only():
    b = make_desk_building(zones=3)
    traj = generate_dataset(b, DisturbanceProfile(), 1, ThermostatPolicy(setpoint=500.0), s0=np.full(3, 25.0))
    assert (traj.actions <= 0.2 * 15.0).all()
    assert traj.actions.max() > 0


def test_pure_hysteresis_actions():
    b = make_desk_building(zones=3)
    traj = generate_dataset(b, DisturbanceProfile(), 2, dither=False)
    assert set(np.unique(traj.actions)) <= {0.0, 7.5}
    assert len(np.unique(traj.actions)) == 2


def test_dataset_determinism():
    b = make_desk_building(zones=3)
    t1 = generate_dataset(b, DisturbanceProfile(seed=2), 2)
    t2 = generate_dataset(b, DisturbanceProfile(seed=2), 2)
    assert np.array_equal(t1.actions, t2.actions) and np.array_equal(t1.states, t2.states)


def test_noise():
    d = np.random.default_rng(0).uniform(1, 2, (50, 5))
    assert np.array_equal(add_noise(d, 0.0, 1), d)
    eps = add_noise(np.ones(1_000_000), 0.1, 3) - 1.0
    assert abs(eps.std() - 0.1) < 0.002
    z = np.zeros((3, 4))
    assert np.array_equal(add_noise(z, 0.7, 2), z)
    with pytest.raises(ValueError):
        add_noise(d, -0.1, 0)


def test_csv_round_trip(tmp_path):
    b = make_desk_building(zones=3)
    traj = generate_dataset(b, DisturbanceProfile(start_day=2), 1)
    path = tmp_path / "t.csv"
    save_trajectory_csv(traj, path)
    header = path.read_text().splitlines()[0]
    assert header == "time,s_1,s_2,s_3,a_1,a_2,a_3,d_out,d_sol_1,d_sol_2,d_sol_3,d_occ_1,d_occ_2,d_occ_3"
    back = load_trajectory_csv(path)
    assert back.start_step == traj.start_step
    for name in ("states", "actions", "disturbances"):
        assert np.array_equal(getattr(back, name), getattr(traj, name))


def test_trajectory_validation_and_transitions():
    with pytest.raises(ValueError):
        Trajectory(np.zeros((3, 2)), np.zeros((2, 2)), np.zeros((3, 5)))
    t = Trajectory(np.arange(6.0).reshape(3, 2), np.zeros((3, 2)), np.zeros((3, 5)))
    s, a, d, sn = t.transitions()
    assert np.array_equal(sn, s + 2)


def test_conditioned_subset_by_count_or_indices():
    assert make_desk_building(zones=6, conditioned=4).actuators == 4
    b = make_desk_building(zones=6, conditioned=(1, 3))
    d = np.zeros(13)
    d[0] = 25.0
    nxt = step(b, np.full(6, 25.0), [1.0, 0.0], d)
    assert nxt[1] < 25.0 and nxt[0] == pytest.approx(nxt[2])
