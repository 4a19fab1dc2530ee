import csv
from dataclasses import replace

import numpy as np
import pytest

from smors.contact import ContactParams, end_effector_world_positions
from smors.controller import hover_equilibrium
from smors.dynamics import FullState, total_energy
from smors.params import RobotParams
from smors.sim import (
    Experiment,
    LOG_COLUMNS,
    SimConfig,
    energy_integrand,
    energy_metric,
    gravity_sweep,
    hover_energy,
    run_closed_loop,
    simulate_open_loop,
    step,
    summarize,
    write_log_csv,
    write_sweep_csv,
)
from smors.trajectory import HoverReference, TrajectoryParams

P = RobotParams()
P_LOSSLESS = replace(P, arm=replace(P.arm, damping=0.0))
HOLD = 0.5


def perturbed_state(arm_offset=0.1):
    eq, _ = hover_equilibrium(P, HOLD, p=(0.0, 0.0, 1.0))
    q = eq.q.copy()
    q[6:] += arm_offset * np.array([1.0, -1.0, 0.5, 0.3, -0.7, 0.2])
    return FullState(q, np.concatenate([[1.0, 0.3, 0.5], [0.5, -0.4, 0.8], np.zeros(6)]))


def test_equilibrium_is_fixed_point():
    state, u = hover_equilibrium(P, HOLD, p=(0.0, 0.0, 1.0))
    new = step(state, u, 0.002, P, ContactParams())
    np.testing.assert_allclose(new.q, state.q, atol=1e-10)
    np.testing.assert_allclose(new.dq, state.dq, atol=1e-10)


def test_free_fall_one_second():
    state = FullState.from_parts(p=(0.0, 0.0, 10.0), q_arm=(P.arm.rest_angle,) * 6)
    end = simulate_open_loop(state, np.zeros(9), P, 1.0, dt=0.002)[-1]
    assert end.p[2] - 10.0 == pytest.approx(-4.905, abs=1e-6)
    np.testing.assert_allclose(end.q_arm, state.q_arm, atol=1e-9)


def test_fourth_order_convergence():
    state, u = hover_equilibrium(P, HOLD, p=(0.0, 0.0, 1.0))
    s0 = perturbed_state()
    u = u + np.array([0.3, -0.2, 0.1, 0.0, 0.2, -0.1, 0.01, 0.0, -0.01])
    ends = []
    for dt in (0.002, 0.001, 0.0005):
        s = simulate_open_loop(s0, u, P, 0.2, dt=dt)[-1]
        ends.append(np.concatenate([s.q, s.dq]))
    order = np.log2(np.linalg.norm(ends[0] - ends[1]) / np.linalg.norm(ends[1] - ends[2]))
    assert 3.7 < order < 4.5


def test_euler_is_first_order():
    s0 = perturbed_state()
    ends = []
    for dt in (0.0004, 0.0002, 0.0001):
        s = simulate_open_loop(s0, np.zeros(9), P, 0.04, dt=dt, order=1)[-1]
        ends.append(np.concatenate([s.q, s.dq]))
    order = np.log2(np.linalg.norm(ends[0] - ends[1]) / np.linalg.norm(ends[1] - ends[2]))
    assert 0.8 < order < 1.2


@pytest.mark.parametrize("arm_offset", [0.0, 0.1])
def test_energy_conserved_without_input_and_contact(arm_offset):
    states = simulate_open_loop(perturbed_state(arm_offset), np.zeros(9), P_LOSSLESS, 2.0, dt=0.002)
    E = np.array([total_energy(s, P_LOSSLESS) for s in states])
    assert np.max(np.abs(E - E[0])) < 1e-3 * abs(E[0])


def test_arm_damping_dissipates():
    states = simulate_open_loop(perturbed_state(), np.zeros(9), P, 0.5, dt=0.002)
    E = np.array([total_energy(s, P) for s in states])
    assert E[-1] < E[0]


def test_energy_integrand_and_normalization():
    assert energy_integrand([1.0, 4.0, 0, 0, 0, 0]) == pytest.approx(9.0)
    assert energy_integrand([1.0, 4.0, -1.0, 0, 0, 0], "thrust") == pytest.approx(5.0)
    with pytest.raises(ValueError):
        energy_integrand(np.ones(6), "watts")
    # holding the hover input for the whole run reproduces the hover reference exactly
    exp = Experiment(sim=SimConfig(duration=0.2))
    state0, u = hover_equilibrium(P, HOLD, p=(0.0, 0.0, 1.0))
    log = run_closed_loop(exp, state0=state0, trajectory=HoverReference((0.0, 0.0, 1.0)))
    np.testing.assert_allclose(log.u, np.tile(u, (len(log.t), 1)), atol=1e-9)
    E_ref = hover_energy(P, HOLD, 0.2)
    assert energy_metric(log) == pytest.approx(E_ref, rel=1e-9)
    assert energy_metric(log, log) == 1.0


def test_level_translation_tracked_exactly():
    exp = Experiment(trajectory=TrajectoryParams(g_frac=0.0), sim=SimConfig(duration=1.0))
    log = run_closed_loop(exp)
    assert np.linalg.norm(log.e_p, axis=1).max() < 0.01
    assert not log.in_contact.any()


def test_no_contact_force_while_airborne():
    exp = Experiment(sim=SimConfig(duration=1.0))
    log = run_closed_loop(exp)
    assert log.in_contact.any()
    for k in range(len(log.t)):
        tips = end_effector_world_positions(FullState(log.q[k], log.dq[k]), P)
        airborne = tips[:, 2] > 0.0
        np.testing.assert_array_equal(log.f_contact[k][airborne], 0.0)


def test_identical_runs_identical_csv(tmp_path):
    exp = Experiment(sim=SimConfig(duration=0.3))
    paths = []
    for name in ("a.csv", "b.csv"):
        write_log_csv(run_closed_loop(exp), tmp_path / name)
        paths.append(tmp_path / name)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    with open(paths[0]) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(LOG_COLUMNS)
    assert len(rows) == 151


def test_short_sweep_table(tmp_path):
    exp = Experiment(sim=SimConfig(duration=0.1))
    table = gravity_sweep(exp)
    assert [r["g_frac"] for r in table] == pytest.approx(np.linspace(0, 1, 11))
    assert all(r["ok"] for r in table)
    assert table[0]["energy_norm_translation"] == 1.0
    path = tmp_path / "sweep.csv"
    write_sweep_csv(table, path)
    assert len(path.read_text().splitlines()) == 12


def test_summary_fields():
    exp = Experiment(sim=SimConfig(duration=0.5))
    s = summarize(run_closed_loop(exp))
    assert s["completed"]
    assert s["duration"] == pytest.approx(0.5)
    assert s["peak_position_error_m"] >= s["max_flight_position_error_m"]


@pytest.mark.parametrize("kwargs", [{"dt": 0.0}, {"duration": -1.0}, {"integrator_order": 2}, {"log_every": 0},
                                    {"energy_metric": "watts"}])
def test_sim_config_validation(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)
