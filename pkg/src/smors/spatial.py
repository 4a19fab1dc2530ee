"""Small rotation / transform kernel shared by every other module.

Rotations are plain 3x3 numpy arrays. Attitude coordinates are
roll-pitch-yaw with R = Rz(yaw) @ Ry(pitch) @ Rx(roll).
"""

import numpy as np

ANTISYM_TOL = 1e-9


def skew(v):
    """Cross-product matrix: skew(v) @ w == np.cross(v, w)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(M, tol=ANTISYM_TOL):
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3):
        raise ValueError(f"vee expects a 3x3 matrix, got shape {M.shape}")
    asym = np.max(np.abs(M + M.T))
    if asym > tol:
        raise ValueError(f"matrix is not antisymmetric (|M + M^T|_max = {asym:.3e})")
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def rot_x(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot2(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def homogeneous2(theta, t):
    T = np.eye(3)
    T[:2, :2] = rot2(theta)
    T[:2, 2] = t
    return T


def is_rotation(R, tol=1e-12):
    R = np.asarray(R, dtype=float)
    return (
        R.shape == (3, 3)
        and np.max(np.abs(R.T @ R - np.eye(3))) <= tol
        and abs(np.linalg.det(R) - 1.0) <= tol
    )


def rpy_to_rot(eta):
    roll, pitch, yaw = eta
    return rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)


def rot_to_rpy(R):
    pitch = -np.arcsin(np.clip(R[2, 0], -1.0, 1.0))
    roll = np.arctan2(R[2, 1], R[2, 2])
    yaw = np.arctan2(R[1, 0], R[0, 0])
    return np.array([roll, pitch, yaw])


def rpy_rate_matrix(eta):
    """T(eta) with body angular velocity omega_B = T(eta) @ eta_dot."""
    roll, pitch, _ = eta
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    return np.array([[1.0, 0.0, -sp], [0.0, cr, sr * cp], [0.0, -sr, cr * cp]])


def rpy_rate_matrix_dot(eta, eta_dot):
    roll, pitch, _ = eta
    droll, dpitch, _ = eta_dot
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    return np.array(
        [
            [0.0, 0.0, -cp * dpitch],
            [0.0, -sr * droll, cr * cp * droll - sr * sp * dpitch],
            [0.0, -cr * droll, -sr * cp * droll - cr * sp * dpitch],
        ]
    )


def rotation_angle(R):
    """Geodesic angle of R in [0, pi]."""
    return float(np.arccos(np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)))


def rot_to_quat(R):
    """Unit quaternion [w, x, y, z] with w >= 0."""
    m = R
    tr = np.trace(m)
    if tr > 0.0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = np.array([0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = np.array([(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = np.array([(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s])
    else:
        s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = np.array([(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s])
    q /= np.linalg.norm(q)
    return q if q[0] >= 0.0 else -q
