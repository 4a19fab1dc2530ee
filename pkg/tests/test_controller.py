from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smors.actuation import input_map
from smors.controller import (
    AllocationError,
    ControllerParams,
    Gains,
    allocate,
    arm_errors,
    arm_lateral_reference,
    attitude_error,
    control_law,
    hover_equilibrium,
    pose_errors,
    virtual_accelerations,
)
from smors.dynamics import FullState, dynamics_terms
from smors.params import RobotParams
from smors.pcc_arm import lateral_position
from smors.sim import Experiment, SimConfig, run_closed_loop
from smors.spatial import rot_z, rpy_to_rot
from smors.trajectory import HoverReference, TrajectoryParams, TrajectorySample

P = RobotParams()
CTRL = ControllerParams()
HOLD = CTRL.arm_hold_angle

angles = st.lists(st.floats(-1.2, 1.2), min_size=3, max_size=3).map(np.array)


def reference(p=(0, 0, 1.0), R=np.eye(3), v=(0, 0, 0), a=(0, 0, 0)):
    z = np.zeros(3)
    return TrajectorySample(t=0.0, p=np.asarray(p, float), v=np.asarray(v, float), a=np.asarray(a, float), j=z,
                            R=R, omega=z, domega=z, stance=False)


def test_pose_errors_examples():
    state = FullState.from_parts(p=(0, 0, 1.0))
    e_p, e_v, e_R, e_w = pose_errors(state, reference(p=(0.1, 0, 1.0), R=rot_z(np.pi / 6)))
    np.testing.assert_allclose(e_p, [0.1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(e_R, [0, 0, 0.5], atol=1e-15)
    np.testing.assert_array_equal(e_v, 0.0)
    np.testing.assert_array_equal(e_w, 0.0)


def test_virtual_acceleration_example():
    gains = Gains(k_p=4.0, k_v=1.0, k_R=1.0, k_w=1.0)
    errors = (np.array([0.1, 0, 0]), np.zeros(3), np.zeros(3), np.zeros(3))
    nu_p, nu_R = virtual_accelerations(errors, reference(a=(0, 0, 0.5)), gains)
    np.testing.assert_allclose(nu_p, [0.4, 0, 0.5], atol=1e-15)
    np.testing.assert_array_equal(nu_R, 0.0)


def test_arm_error_example():
    gains = Gains(k_p_arm=100.0)
    state = FullState.from_parts(q_arm=(HOLD,) * 6)
    w_ref = arm_lateral_reference(P, HOLD)
    nu, grads = arm_errors(state, w_ref + 0.01, gains, P)
    np.testing.assert_allclose(nu, [1.0, 1.0, 1.0], atol=1e-12)
    _, dw = lateral_position(HOLD, HOLD, P.arm)
    np.testing.assert_allclose(grads[0], dw, atol=1e-15)


@given(angles, angles)
def test_attitude_error_antisymmetric(a, b):
    Ra, Rb = rpy_to_rot(a), rpy_to_rot(b)
    np.testing.assert_allclose(attitude_error(Ra, Rb), -attitude_error(Rb, Ra), atol=1e-15)


@given(st.floats(-np.pi + 1e-3, np.pi - 1e-3))
def test_attitude_error_yaw(theta):
    np.testing.assert_allclose(attitude_error(np.eye(3), rot_z(theta)), [0, 0, np.sin(theta)], atol=1e-15)


def test_hover_equilibrium_input():
    state, u = hover_equilibrium(P, HOLD)
    G = input_map(state.q, P).G
    g = dynamics_terms(state, P).g
    assert np.linalg.norm(G @ u - g) < 1e-6
    assert np.all(u[:6] > 0) and np.all(u[:6] <= P.propeller.f_max)
    w = [lateral_position(*state.q_arm[2 * k : 2 * k + 2], P.arm)[0] for k in range(3)]
    np.testing.assert_allclose(w, arm_lateral_reference(P, HOLD), atol=1e-10)


def test_zero_gravity_needs_no_input():
    params = replace(P, arm=replace(P.arm, stiffness=0.0, damping=0.0))
    state = FullState.from_parts(p=(0, 0, 1.0), q_arm=(HOLD,) * 6)
    out = control_law(state, reference(), CTRL, params, g_frac=0.0)
    np.testing.assert_allclose(out.u, 0.0, atol=1e-12)


def test_control_is_affine_in_commanded_acceleration():
    state = FullState(np.concatenate([[0.1, -0.2, 1.0], [0.05, -0.1, 0.2], np.full(6, 0.4)]),
                      np.linspace(-0.3, 0.3, 12))
    outs = [control_law(state, reference(a=a), CTRL, P).u_unsaturated
            for a in ((0, 0, 0.0), (0, 0, 1.0), (0, 0, 0.5))]
    np.testing.assert_allclose(outs[2], 0.5 * (outs[0] + outs[1]), atol=1e-9)


@given(angles, st.lists(st.floats(-0.8, 0.8), min_size=6, max_size=6).map(np.array))
def test_allocation_residual(eta, q_arm):
    eta = eta * 0.5
    state = FullState.from_parts(p=(0, 0, 1.0), eta=eta, q_arm=q_arm)
    out = control_law(state, reference(), CTRL, P)
    if out.saturated == 0:
        assert out.residual < 1e-9


def test_allocation_rejects_rank_loss():
    G = np.zeros((12, 9))
    G[0, 0] = 1.0
    with pytest.raises(AllocationError):
        allocate(G, np.ones(12))


def test_validation():
    with pytest.raises(ValueError):
        Gains(k_p=(-1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        ControllerParams(allocation="magic")
    with pytest.raises(ValueError):
        ControllerParams(saturation_weights=(1.0, 0.0, 1.0))


def hover_run(offset, duration=3.0):
    exp = Experiment(sim=SimConfig(duration=duration))
    target = np.array([0.0, 0.0, 1.0])
    state0, _ = hover_equilibrium(P, HOLD, p=target + np.asarray(offset))
    log = run_closed_loop(exp, state0=state0, trajectory=HoverReference(target))
    return log, np.linalg.norm(log.e_p, axis=1)


def test_hover_recovers_horizontal_offset():
    log, e = hover_run([0.05, 0.0, 0.0])
    assert log.completed
    assert e[-1] < 1e-3
    after = log.t >= 0.2
    assert np.all(np.diff(e[after]) <= 0.0)


def test_hover_recovers_vertical_offset():
    log, e = hover_run([0.0, 0.0, 0.05])
    assert e[-1] < 1e-3
    # overshoot stays at the micrometre level
    after = log.t >= 0.2
    assert np.max(np.diff(e[after])) < 1e-6
    assert np.max(e[after][np.argmin(e[after]):]) < 1e-6


def test_nominal_jump_without_saturation():
    exp = Experiment(trajectory=TrajectoryParams(), sim=SimConfig(duration=3.0))
    log = run_closed_loop(exp)
    assert log.completed
    assert log.saturation_events == 0
    assert log.in_contact.any()
