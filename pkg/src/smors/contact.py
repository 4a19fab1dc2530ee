"""Ground contact at the three soft-arm end-effectors.

The ground is a stiff, frictionless spring-damper. Only the arm tips can
touch it; other propeller points are merely checked for clearance.
"""

from dataclasses import dataclass

import numpy as np

from .actuation import propeller_pose
from .dynamics import FullState, end_effector_kinematics
from .params import RobotParams


@dataclass(frozen=True)
class ContactParams:
    k_n: float = 5000.0
    d_n: float = 10.0
    z0: float = 0.0

    def __post_init__(self):
        if not self.k_n > 0:
            raise ValueError("contact.k_n must be positive")
        if self.d_n < 0:
            raise ValueError("contact.d_n must be non-negative")


def end_effector_world_positions(state: FullState, params: RobotParams):
    pos, _, _ = end_effector_kinematics(state, params)
    return pos


def normal_forces(z, zdot, contact: ContactParams):
    """Normal force magnitudes for tip heights z and vertical velocities zdot."""
    z = np.asarray(z, dtype=float)
    zdot = np.asarray(zdot, dtype=float)
    fn = np.maximum(0.0, contact.k_n * (contact.z0 - z) - contact.d_n * zdot)
    return np.where(z > contact.z0, 0.0, fn)


def contact_forces(state: FullState, params: RobotParams, contact: ContactParams, kinematics=None):
    """World-frame contact forces (3, 3), one row per soft-arm tip."""
    pos, vel, _ = end_effector_kinematics(state, params) if kinematics is None else kinematics
    forces = np.zeros((3, 3))
    forces[:, 2] = normal_forces(pos[:, 2], vel[:, 2], contact)
    return forces


def propeller_clearance(state: FullState, params: RobotParams, contact: ContactParams):
    """Lowest world height over all six propeller centres minus the ground height."""
    R = state.R
    heights = [(state.p + R @ propeller_pose(i, state.q_arm, params)[1])[2] for i in range(1, 7)]
    return min(heights) - contact.z0
