"""Propeller geometry, rotor wrench model and the generalized input map.

Propellers are numbered 1..6; odd numbers sit at the end of the first
segment of a soft arm, even numbers on rigid arms. Thrust magnitudes are
commanded directly, spin speed sqrt(f / c_f) is only reported.
"""

from dataclasses import dataclass

import numpy as np

from .params import RobotParams
from .pcc_arm import cosc, dcosc, dsinc, sinc
from .spatial import rot_x, rot_y, rot_z, rpy_rate_matrix, rpy_to_rot

MOUNT_ANGLES = np.arange(6) * np.pi / 3
SPIN_SIGN = np.array([(-1.0) ** i for i in range(6)])  # (-1)^(i-1) for i = 1..6
SOFT_ARM_OF = {1: 0, 3: 1, 5: 2}
N_Q = 12
N_U = 9


@dataclass(frozen=True)
class WrenchMaps:
    F1: np.ndarray  # 3x6, body-frame thrust directions
    F2: np.ndarray  # 3x6, body-frame moments about the body origin
    G: np.ndarray  # 12x9 generalized input map


def arm_angles(q):
    """Split the 12-vector into ((q1, q2) per soft arm)."""
    return np.asarray(q[6:12], dtype=float).reshape(3, 2)


def propeller_pose(i, q_arm, params: RobotParams):
    """Body-frame orientation and position of propeller i (1..6).

    ``q_arm`` holds the six arm curvature angles [q11, q21, q13, q23, q15, q25];
    the pose of a soft-arm propeller depends on the first-segment angle only.
    """
    if i not in range(1, 7):
        raise ValueError(f"propeller index must be in 1..6, got {i}")
    alpha = params.propeller.alpha
    Rz = rot_z(MOUNT_ANGLES[i - 1])
    if i % 2 == 0:
        return Rz @ rot_x(alpha), Rz @ np.array([params.propeller.arm_length, 0.0, 0.0])
    q1 = float(np.asarray(q_arm).reshape(3, 2)[SOFT_ARM_OF[i], 0])
    L1 = params.arm.L1
    p_arm = np.array([L1 * sinc(q1), 0.0, -L1 * cosc(q1)])
    return Rz @ rot_y(q1) @ rot_x(-alpha), Rz @ p_arm


def _soft_propeller_position_dq1(i, q1, params):
    L1 = params.arm.L1
    return rot_z(MOUNT_ANGLES[i - 1]) @ np.array([L1 * dsinc(q1), 0.0, -L1 * dcosc(q1)])


def wrench_columns(q_arm, params: RobotParams):
    """F1 (thrust directions) and F2 (moments) in the body frame, both 3x6."""
    F1 = np.empty((3, 6))
    pos = np.empty((3, 6))
    for i in range(1, 7):
        R, pos[:, i - 1] = propeller_pose(i, q_arm, params)
        F1[:, i - 1] = R[:, 2]
    F2 = np.cross(pos, F1, axis=0) + np.asarray(SPIN_SIGN) * params.propeller.c_tau * F1
    return F1, F2


def thrust_wrench(u16, q_arm, R_B, params: RobotParams):
    """World-frame total force and body-frame total moment of six thrusts."""
    u16 = np.asarray(u16, dtype=float)
    if u16.shape != (6,):
        raise ValueError("expected six thrust values")
    if np.any(u16 < 0):
        raise ValueError(f"propeller thrusts must be non-negative, got {u16}")
    F1, F2 = wrench_columns(q_arm, params)
    return R_B @ F1 @ u16, F2 @ u16


def body_wrench_map(q_arm, R_B, params: RobotParams):
    """6x6 map from thrusts to [world force; body moment]."""
    F1, F2 = wrench_columns(q_arm, params)
    return np.vstack([R_B @ F1, F2])


def input_map(q, params: RobotParams):
    """Generalized forces (12) produced by unit inputs (9): six thrusts and three tendon torques."""
    q = np.asarray(q, dtype=float)
    eta = q[3:6]
    R_B = rpy_to_rot(eta)
    T = rpy_rate_matrix(eta)
    q_arm = q[6:12]
    F1, F2 = wrench_columns(q_arm, params)
    c_tau = params.propeller.c_tau
    G = np.zeros((N_Q, N_U))
    G[0:3, 0:6] = R_B @ F1
    G[3:6, 0:6] = T.T @ F2
    for i in (1, 3, 5):
        k = SOFT_ARM_OF[i]
        q1 = q_arm[2 * k]
        d = F1[:, i - 1]
        bend_axis = rot_z(MOUNT_ANGLES[i - 1])[:, 1]
        G[6 + 2 * k, i - 1] = _soft_propeller_position_dq1(i, q1, params) @ d + SPIN_SIGN[i - 1] * c_tau * (
            bend_axis @ d
        )
        # tendon torque: unit torque on every rotational augmented joint, projected by J_m^T -> [1, 1]
        G[6 + 2 * k : 8 + 2 * k, 6 + k] = 1.0
    return WrenchMaps(F1=F1, F2=F2, G=G)


def spin_speeds(u16, params: RobotParams):
    return np.sqrt(np.clip(u16, 0.0, None) / params.propeller.c_f)
