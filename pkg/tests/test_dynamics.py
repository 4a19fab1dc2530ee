from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smors.actuation import input_map
from smors.controller import hover_equilibrium
from smors.dynamics import (
    FullState,
    PitchGuardError,
    coriolis_matrix,
    dynamics_terms,
    external_generalized_force,
    forward_dynamics,
    gravity_vector,
    mass_matrix,
    mass_matrix_batch,
    potential_energy,
    total_energy,
)
from smors.params import GRAVITY, RobotParams
from smors.pcc_arm import arm_planar_points
from smors.spatial import rot_z, rpy_rate_matrix, rpy_to_rot

P = RobotParams()
P_NO_SPRING = replace(P, arm=replace(P.arm, stiffness=0.0, damping=0.0))

floats = st.floats(-1.0, 1.0)
state_q = st.tuples(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.lists(st.floats(-0.8, 0.8), min_size=3, max_size=3),
                    st.lists(st.floats(-1.5, 1.5), min_size=6, max_size=6)).map(lambda t: np.concatenate(t))
state_dq = st.lists(st.floats(-3, 3), min_size=12, max_size=12).map(np.array)


def random_states(n, seed=0):
    rng = np.random.default_rng(seed)
    q = np.zeros((n, 12))
    q[:, 0:3] = rng.uniform(-2, 2, (n, 3))
    q[:, 3:6] = rng.uniform(-1.2, 1.2, (n, 3))
    q[:, 6:12] = rng.uniform(-np.pi, np.pi, (n, 6))
    return q


def point_positions_world(q, params=P):
    """World positions of the twelve lumped arm masses, composed independently."""
    q = np.asarray(q)
    R = rpy_to_rot(q[3:6])
    out = []
    for k, mount in enumerate((0.0, 2 * np.pi / 3, 4 * np.pi / 3)):
        pos, _ = arm_planar_points(q[6 + 2 * k], q[7 + 2 * k], params.arm)
        for s, w in pos:
            out.append(q[0:3] + R @ rot_z(mount) @ np.array([s, 0.0, -w]))
    return np.array(out)


def kinetic_energy_oracle(q, dq, params=P):
    h = 1e-7
    vel = (point_positions_world(q + h * dq, params) - point_positions_world(q - h * dq, params)) / (2 * h)
    m = np.tile(params.arm.point_masses, 3)
    omega = rpy_rate_matrix(q[3:6]) @ dq[3:6]
    body = 0.5 * params.platform.mass * dq[0:3] @ dq[0:3] + 0.5 * omega @ params.platform.inertia_matrix @ omega
    return body + 0.5 * float(np.sum(m * np.sum(vel**2, axis=1)))


def potential_oracle(q, params=P, g_frac=1.0):
    m = np.tile(params.arm.point_masses, 3)
    z = point_positions_world(q, params)[:, 2]
    grav = g_frac * GRAVITY * (params.platform.mass * q[2] + m @ z)
    return grav + 0.5 * params.arm.stiffness * np.sum((q[6:12] - params.arm.rest_angle) ** 2)


# -- inertia


def test_translational_block_is_total_mass():
    B = mass_matrix_batch(random_states(50), P)
    np.testing.assert_allclose(B[:, 0:3, 0:3], np.broadcast_to(P.total_mass * np.eye(3), (50, 3, 3)), atol=1e-15)


def test_inertia_symmetric_random_states():
    B = mass_matrix_batch(random_states(100, seed=1), P)
    assert np.max(np.abs(B - np.swapaxes(B, 1, 2))) < 1e-10


def test_inertia_positive_definite_1000_states():
    B = mass_matrix_batch(random_states(1000, seed=2), P)
    assert np.linalg.eigvalsh(B).min() > 0


def test_arm_arm_blocks_exactly_zero():
    B = mass_matrix_batch(random_states(200, seed=3), P)
    for a in range(3):
        for b in range(3):
            if a != b:
                assert np.all(B[:, 6 + 2 * a : 8 + 2 * a, 6 + 2 * b : 8 + 2 * b] == 0.0)


@given(state_q, state_dq)
def test_kinetic_energy_matches_point_mass_oracle(q, dq):
    ke = 0.5 * dq @ mass_matrix_batch(q, P) @ dq
    ref = kinetic_energy_oracle(q, dq)
    assert abs(ke - ref) <= 1e-7 * max(ref, 1e-9)


def test_pitch_guard():
    with pytest.raises(PitchGuardError):
        mass_matrix(FullState.from_parts(eta=(0.0, 1.4, 0.0)), P)


# -- bias and gravity


def test_zero_rates_zero_coriolis():
    q = random_states(1, seed=4)[0]
    q[4] = 0.3
    terms = dynamics_terms(FullState(q, np.zeros(12)), P)
    np.testing.assert_array_equal(terms.Cdq, np.zeros(12))


def test_zero_gravity_fraction():
    q = random_states(1, seed=5)[0]
    q[4] = 0.2
    np.testing.assert_array_equal(gravity_vector(q, P_NO_SPRING, g_frac=0.0), np.zeros(12))
    # with springs only the elastic load remains
    g = gravity_vector(q, P, g_frac=0.0)
    np.testing.assert_allclose(g[6:], P.arm.stiffness * (q[6:] - P.arm.rest_angle), atol=1e-15)
    np.testing.assert_array_equal(g[:6], 0.0)


def test_level_straight_gravity_load():
    g = gravity_vector(np.zeros(12), P)
    np.testing.assert_allclose(g[0:3], [0, 0, P.total_mass * 9.81], atol=1e-12)
    assert P.total_mass == pytest.approx(1.2 + 3 * 0.14)


@given(state_q, st.floats(0.0, 1.0))
def test_gravity_is_gradient_of_potential(q, g_frac):
    h = 1e-6
    fd = np.array([(potential_oracle(q + h * e, P, g_frac) - potential_oracle(q - h * e, P, g_frac)) / (2 * h)
                   for e in np.eye(12)])
    np.testing.assert_allclose(gravity_vector(q, P, g_frac), fd, atol=1e-7)
    assert potential_energy(q, P, g_frac) == pytest.approx(potential_oracle(q, P, g_frac), abs=1e-12)


@given(state_q, state_dq)
def test_passivity(q, dq):
    state = FullState(q, dq)
    C = coriolis_matrix(state, P)
    h = 1e-6
    B_dot = (mass_matrix_batch(q + h * dq, P) - mass_matrix_batch(q - h * dq, P)) / (2 * h)
    assert abs(dq @ (B_dot - 2 * C) @ dq) < 1e-6 * max(dq @ dq, 1e-12)
    np.testing.assert_allclose(C @ dq, dynamics_terms(state, P).Cdq, atol=1e-9)


# -- forward dynamics


def com(q, params=P):
    m = np.tile(params.arm.point_masses, 3)
    return (params.platform.mass * q[0:3] + m @ point_positions_world(q, params)) / params.total_mass


def com_acceleration(q, dq, ddq, h=1e-3):
    """J ddq + dq^T H dq by finite differences along unit directions."""
    hj = 1e-6
    n_a, n_v = np.linalg.norm(ddq), np.linalg.norm(dq)
    a, v = ddq / n_a, dq / n_v
    J_ddq = n_a * (com(q + hj * a) - com(q - hj * a)) / (2 * hj)
    c = [com(q + k * h * v) for k in (-2, -1, 0, 1, 2)]
    curv = n_v**2 * (-c[0] + 16 * c[1] - 30 * c[2] + 16 * c[3] - c[4]) / (12 * h * h)
    return J_ddq + curv


def sample_state(rng, rate=1.0):
    q = random_states(1, seed=int(rng.integers(1000)))[0]
    q[3:6] = rng.uniform(-0.6, 0.6, 3)
    q[6:12] = rng.uniform(-1.5, 1.5, 6)
    return q, rng.uniform(-rate, rate, 12)


def test_momentum_row_is_com_jacobian():
    rng = np.random.default_rng(6)
    for _ in range(10):
        q, _ = sample_state(rng)
        h = 1e-6
        J = np.column_stack([(com(q + h * e) - com(q - h * e)) / (2 * h) for e in np.eye(12)])
        np.testing.assert_allclose(mass_matrix_batch(q, P)[0:3], P.total_mass * J, atol=1e-8)


@pytest.mark.parametrize("g_frac", [1.0, 0.3, 0.0])
def test_com_free_fall_without_input(g_frac):
    """With B[0:3] dq = M dc/dt, the CoM acceleration is the momentum rate over the total mass."""
    rng = np.random.default_rng(7)
    for _ in range(10):
        q, dq = sample_state(rng, 2.0)
        ddq = forward_dynamics(FullState(q, dq), np.zeros(9), P, g_frac=g_frac)
        h = 1e-6
        B_dot = (mass_matrix_batch(q + h * dq, P) - mass_matrix_batch(q - h * dq, P)) / (2 * h)
        acc = (mass_matrix_batch(q, P)[0:3] @ ddq + B_dot[0:3] @ dq) / P.total_mass
        np.testing.assert_allclose(acc, [0, 0, -g_frac * 9.81], atol=1e-8)


def test_com_free_fall_by_double_differences():
    """Coarse cross-check straight from the point-mass positions (limited by difference roundoff)."""
    rng = np.random.default_rng(9)
    for _ in range(5):
        q, dq = sample_state(rng)
        ddq = forward_dynamics(FullState(q, dq), np.zeros(9), P)
        np.testing.assert_allclose(com_acceleration(q, dq, ddq), [0, 0, -9.81], atol=1e-4)


def test_com_acceleration_from_momentum_balance():
    """d/dt of the linear momentum B[0:3] dq equals total thrust plus gravity."""
    rng = np.random.default_rng(8)
    for _ in range(10):
        q = random_states(1, seed=int(rng.integers(1000)))[0]
        q[3:6] = rng.uniform(-0.6, 0.6, 3)
        q[6:12] = rng.uniform(-1.5, 1.5, 6)
        dq = rng.uniform(-2, 2, 12)
        u = np.concatenate([rng.uniform(0, 8, 6), rng.uniform(-1, 1, 3)])
        state = FullState(q, dq)
        ddq = forward_dynamics(state, u, P)
        h = 1e-6
        B_dot = (mass_matrix_batch(q + h * dq, P) - mass_matrix_batch(q - h * dq, P)) / (2 * h)
        dmomentum = mass_matrix_batch(q, P)[0:3] @ ddq + B_dot[0:3] @ dq
        force = input_map(q, P).G[0:3, 0:6] @ u[:6] - np.array([0, 0, P.total_mass * GRAVITY])
        np.testing.assert_allclose(dmomentum, force, atol=1e-8)


def test_hover_input_is_equilibrium():
    state, u = hover_equilibrium(P, 0.5)
    assert np.linalg.norm(forward_dynamics(state, u, P)) < 1e-6


def test_tip_force_moves_only_its_arm():
    """Clamped base, upward force on tip 1: only arm 1 responds and its tip accelerates upwards.

    The arms bend downwards, so the load unbends both segments.
    """
    state = FullState(np.zeros(12), np.zeros(12))
    f = np.zeros((3, 3))
    f[0] = [0, 0, 10.0]
    tau = external_generalized_force(state, f, P)
    assert np.all(tau[6:8] < 0)
    np.testing.assert_array_equal(tau[8:], 0.0)
    B = mass_matrix(state, P)
    ddq_arm = np.linalg.solve(B[6:, 6:], tau[6:])
    np.testing.assert_array_equal(ddq_arm[2:], 0.0)
    _, dpos = arm_planar_points(0.0, 0.0, P.arm)
    tip_acc_z = -dpos[3, 1] @ ddq_arm[0:2]
    assert tip_acc_z > 0


@given(state_q, state_dq)
def test_total_energy_is_kinetic_plus_potential(q, dq):
    E = total_energy(FullState(q, dq), P)
    assert E == pytest.approx(kinetic_energy_oracle(q, dq) + potential_oracle(q), rel=1e-7, abs=1e-9)
