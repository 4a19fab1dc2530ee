"""Floating-base Euler-Lagrange model: body + three projected soft arms (12 DOF).

Generalized coordinates: q = [p_B, (roll, pitch, yaw), q11, q21, q13, q23, q15, q25].
The inertia matrix is assembled from the kinetic energy of the base and of
the lumped arm masses; Coriolis terms come from Christoffel symbols of that
matrix (central differences), gravity from the gradient of the potential.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .actuation import MOUNT_ANGLES, input_map
from .params import GRAVITY, RobotParams
from .pcc_arm import arm_planar_points
from .spatial import rpy_rate_matrix, rpy_to_rot, rot_z

FD_STEP = 1e-6
COND_LIMIT = 1e12
# columns of q that the inertia matrix depends on
_CONFIG_DOFS = tuple(range(3, 12))


class NumericalDegeneracyError(RuntimeError):
    pass


class PitchGuardError(ValueError):
    pass


@dataclass(frozen=True)
class FullState:
    q: np.ndarray
    dq: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float).reshape(12))
        object.__setattr__(self, "dq", np.asarray(self.dq, dtype=float).reshape(12))

    @property
    def p(self):
        return self.q[0:3]

    @property
    def eta(self):
        return self.q[3:6]

    @property
    def R(self):
        return rpy_to_rot(self.eta)

    @property
    def v(self):
        return self.dq[0:3]

    @property
    def omega(self):
        return rpy_rate_matrix(self.eta) @ self.dq[3:6]

    @property
    def q_arm(self):
        return self.q[6:12]

    @property
    def dq_arm(self):
        return self.dq[6:12]

    @classmethod
    def from_parts(cls, p=(0, 0, 0), eta=(0, 0, 0), q_arm=(0,) * 6, v=(0, 0, 0), eta_dot=(0, 0, 0), dq_arm=(0,) * 6):
        return cls(np.concatenate([p, eta, q_arm]), np.concatenate([v, eta_dot, dq_arm]))


@dataclass(frozen=True)
class DynamicsTerms:
    B: np.ndarray
    Cdq: np.ndarray
    g: np.ndarray
    damping: np.ndarray


def check_state(state: FullState, params: RobotParams):
    guard = np.deg2rad(params.platform.pitch_guard_deg)
    if abs(state.q[4]) > guard:
        raise PitchGuardError(f"pitch {np.rad2deg(state.q[4]):.1f} deg beyond guard {params.platform.pitch_guard_deg} deg")
    if np.any(np.abs(state.q_arm) > params.arm.q_max):
        raise ValueError(f"arm angles {state.q_arm} outside joint limit {params.arm.q_max}")


# -- batched kinematics of the 12 lumped arm masses


def _mount_rotations():
    return np.array([rot_z(MOUNT_ANGLES[i]) for i in (0, 2, 4)])


_MOUNTS = _mount_rotations()


def arm_points_body(q_arm, params: RobotParams):
    """Body-frame positions (..., 12, 3) and d/dq_arm (..., 12, 3, 6) of the lumped arm masses.

    Points are ordered arm by arm (soft arms 1, 3, 5), four per arm:
    seg1 midpoint, seg1 end (carries the propeller), seg2 midpoint, seg2 end.
    """
    q_arm = np.asarray(q_arm, dtype=float)
    batch = q_arm.shape[:-1]
    qa = q_arm.reshape(batch + (3, 2))
    pos2, dpos2 = arm_planar_points(qa[..., 0], qa[..., 1], params.arm)  # (...,3,4,2), (...,3,4,2,2)
    # planar (s, w) -> arm frame (s, 0, -w) -> body frame via the mount rotation about z
    c, sn = _MOUNTS[:, 0, 0, None], _MOUNTS[:, 1, 0, None]
    x, w = pos2[..., 0], pos2[..., 1]
    pos = np.stack([c * x, sn * x, -w], axis=-1)
    dx, dw = dpos2[..., 0, :], dpos2[..., 1, :]
    dloc = np.stack([c[..., None] * dx, sn[..., None] * dx, -dw], axis=-2)
    r = pos.reshape(batch + (12, 3))
    dr = np.zeros(batch + (3, 4, 3, 6))
    for a in range(3):
        dr[..., a, :, :, 2 * a : 2 * a + 2] = dloc[..., a, :, :, :]
    return r, dr.reshape(batch + (12, 3, 6))


def _point_masses(params: RobotParams):
    return np.tile(params.arm.point_masses, 3)


def _skew_batch(v):
    z = np.zeros(v.shape[:-1])
    x, y, w = v[..., 0], v[..., 1], v[..., 2]
    return np.stack([np.stack([z, -w, y], -1), np.stack([w, z, -x], -1), np.stack([-y, x, z], -1)], -2)


def _rpy_batch(eta):
    roll, pitch, yaw = eta[..., 0], eta[..., 1], eta[..., 2]
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    R = np.stack(
        [
            np.stack([cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr], -1),
            np.stack([sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr], -1),
            np.stack([-sp, cp * sr, cp * cr], -1),
        ],
        -2,
    )
    z, o = np.zeros_like(roll), np.ones_like(roll)
    T = np.stack([np.stack([o, z, -sp], -1), np.stack([z, cr, sr * cp], -1), np.stack([z, -sr, cr * cp], -1)], -2)
    return R, T


def mass_matrix_batch(q, params: RobotParams, points=None):
    """Inertia matrices for a batch of configurations, shape (..., 12, 12)."""
    q = np.asarray(q, dtype=float)
    batch = q.shape[:-1]
    R, T = _rpy_batch(q[..., 3:6])
    r, dr = arm_points_body(q[..., 6:12], params) if points is None else points
    m = _point_masses(params)
    M = params.total_mass
    J_B = params.platform.inertia_matrix

    m_r = np.einsum("k,...ki->...i", m, r)
    m_dr = np.einsum("k,...kia->...ia", m, dr)
    rr = np.einsum("k,...ki,...kj->...ij", m, r, r)
    r2 = np.einsum("...ii->...", rr)
    inertia_pts = r2[..., None, None] * np.eye(3) - rr
    r_x_dr = np.einsum("k,...kij,...kja->...ia", m, _skew_batch(r), dr)

    B = np.zeros(batch + (12, 12))
    B[..., 0:3, 0:3] = M * np.eye(3)
    B_pe = -(R @ _skew_batch(m_r) @ T)
    B[..., 0:3, 3:6] = B_pe
    B[..., 3:6, 0:3] = np.swapaxes(B_pe, -1, -2)
    B_pa = R @ m_dr
    B[..., 0:3, 6:12] = B_pa
    B[..., 6:12, 0:3] = np.swapaxes(B_pa, -1, -2)
    B[..., 3:6, 3:6] = np.swapaxes(T, -1, -2) @ (J_B + inertia_pts) @ T
    B_ea = np.swapaxes(T, -1, -2) @ r_x_dr
    B[..., 3:6, 6:12] = B_ea
    B[..., 6:12, 3:6] = np.swapaxes(B_ea, -1, -2)
    B[..., 6:12, 6:12] = np.einsum("k,...kia,...kib->...ab", m, dr, dr)
    return B


def mass_matrix(state: FullState, params: RobotParams):
    check_state(state, params)
    return mass_matrix_batch(state.q, params)


_STENCIL_ROWS = np.array(_CONFIG_DOFS)
_STENCIL_IDX = np.arange(len(_CONFIG_DOFS))


def _mass_matrix_stencil(q, params: RobotParams, h):
    n = len(_CONFIG_DOFS)
    stack = np.repeat(q[None, :], 2 * n + 1, axis=0)
    stack[1 + 2 * _STENCIL_IDX, _STENCIL_ROWS] += h
    stack[2 + 2 * _STENCIL_IDX, _STENCIL_ROWS] -= h
    points = arm_points_body(stack[:, 6:12], params)
    Bs = mass_matrix_batch(stack, params, points)
    dB = np.zeros((12, 12, 12))
    dB[3:] = (Bs[1::2] - Bs[2::2]) / (2 * h)
    return Bs[0], dB, (points[0][0], points[1][0])


def mass_matrix_derivatives(q, params: RobotParams, h=FD_STEP):
    """B(q) and dB/dq_k (12, 12, 12) by central differences (zero for the position coordinates)."""
    B, dB, _ = _mass_matrix_stencil(np.asarray(q, dtype=float), params, h)
    return B, dB


def coriolis_matrix(state: FullState, params: RobotParams):
    _, dB = mass_matrix_derivatives(state.q, params)
    dq = state.dq
    return 0.5 * (np.einsum("kij,k->ij", dB, dq) + np.einsum("jik,k->ij", dB, dq) - np.einsum("ijk,k->ij", dB, dq))


def gravity_vector(q, params: RobotParams, g_frac=1.0, points=None):
    """Gradient of gravitational plus elastic potential energy."""
    q = np.asarray(q, dtype=float)
    g = g_frac * GRAVITY
    R = rpy_to_rot(q[3:6])
    T = rpy_rate_matrix(q[3:6])
    r, dr = arm_points_body(q[6:12], params) if points is None else points
    m = _point_masses(params)
    e3_body = R.T @ np.array([0.0, 0.0, 1.0])
    out = np.zeros(12)
    out[2] = params.total_mass * g
    m_r = m @ r
    out[3:6] = g * T.T @ np.cross(m_r, e3_body)
    out[6:12] = g * np.einsum("k,kia,i->a", m, dr, e3_body)
    out[6:12] += params.arm.stiffness * (q[6:12] - params.arm.rest_angle)
    return out


def potential_energy(q, params: RobotParams, g_frac=1.0):
    q = np.asarray(q, dtype=float)
    R = rpy_to_rot(q[3:6])
    r, _ = arm_points_body(q[6:12], params)
    m = _point_masses(params)
    z = params.total_mass * q[2] + (R @ (m @ r))[2]
    elastic = 0.5 * params.arm.stiffness * np.sum((q[6:12] - params.arm.rest_angle) ** 2)
    return g_frac * GRAVITY * z + elastic


def total_energy(state: FullState, params: RobotParams, g_frac=1.0):
    B = mass_matrix_batch(state.q, params)
    return 0.5 * state.dq @ B @ state.dq + potential_energy(state.q, params, g_frac)


def center_of_mass(q, params: RobotParams):
    q = np.asarray(q, dtype=float)
    r, _ = arm_points_body(q[6:12], params)
    m = _point_masses(params)
    return q[0:3] + rpy_to_rot(q[3:6]) @ (m @ r) / params.total_mass


def dynamics_terms(state: FullState, params: RobotParams, g_frac=1.0):
    B, dB, points = _mass_matrix_stencil(state.q, params, FD_STEP)
    dq = state.dq
    B_dot = np.tensordot(dq, dB, axes=1)
    Cdq = B_dot @ dq - 0.5 * ((dB @ dq) @ dq)
    damping = np.zeros(12)
    damping[6:12] = params.arm.damping * dq[6:12]
    g = gravity_vector(state.q, params, g_frac, points)
    return DynamicsTerms(B=B, Cdq=Cdq, g=g, damping=damping)


def bias_and_gravity(state: FullState, params: RobotParams, g_frac=1.0):
    if not 0.0 <= g_frac <= 1.0:
        raise ValueError(f"g_frac must lie in [0, 1], got {g_frac}")
    check_state(state, params)
    terms = dynamics_terms(state, params, g_frac)
    return terms.Cdq, terms.g


# -- point Jacobians


def point_jacobian(q, r, dr):
    """World-frame 3x12 Jacobian of a body-attached arm point."""
    R = rpy_to_rot(q[3:6])
    T = rpy_rate_matrix(q[3:6])
    J = np.zeros((3, 12))
    J[:, 0:3] = np.eye(3)
    x, y, z = r
    r_x = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    J[:, 3:6] = -R @ r_x @ T
    J[:, 6:12] = R @ dr
    return J


TIP_POINTS = (3, 7, 11)


def end_effector_kinematics(state: FullState, params: RobotParams):
    """World positions (3, 3), velocities (3, 3) and Jacobians (3, 3, 12) of the three arm tips."""
    r, dr = arm_points_body(state.q_arm, params)
    R = state.R
    pos = np.empty((3, 3))
    vel = np.empty((3, 3))
    jac = np.empty((3, 3, 12))
    for n, k in enumerate(TIP_POINTS):
        J = point_jacobian(state.q, r[k], dr[k])
        pos[n] = state.p + R @ r[k]
        vel[n] = J @ state.dq
        jac[n] = J
    return pos, vel, jac


def external_generalized_force(state: FullState, f_ext, params: RobotParams, jacobians=None):
    """J_e^T f for world-frame forces (3, 3) applied at the three end-effectors."""
    if jacobians is None:
        _, _, jacobians = end_effector_kinematics(state, params)
    return np.einsum("nij,ni->j", jacobians, np.asarray(f_ext, dtype=float).reshape(3, 3))


def solve_spd(B, rhs):
    c, low = cho_factor(B)
    d = np.abs(np.diag(c))
    cond_est = (d.max() / d.min()) ** 2
    if cond_est > COND_LIMIT:
        raise NumericalDegeneracyError(f"inertia matrix ill-conditioned (estimate {cond_est:.3e})")
    return cho_solve((c, low), rhs)


def forward_dynamics(state: FullState, u, params: RobotParams, f_ext=None, g_frac=1.0, terms=None, G=None):
    """Generalized accelerations from B qdd = G u + J_e^T f_ext - C dq - g - D dq."""
    check_state(state, params)
    if terms is None:
        terms = dynamics_terms(state, params, g_frac)
    if G is None:
        G = input_map(state.q, params).G
    rhs = G @ np.asarray(u, dtype=float) - terms.Cdq - terms.g - terms.damping
    if f_ext is not None:
        rhs = rhs + external_generalized_force(state, f_ext, params)
    return solve_spd(terms.B, rhs)
