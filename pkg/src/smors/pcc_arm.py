"""Piecewise-constant-curvature soft arm.

Planar arm coordinates are (s, w): s along the unbent arm, w in the bending
direction. Embedded in the 3D arm frame (x along the arm, z up) the arm
bends downwards, i.e. (s, w) -> (s, 0, -w), and a planar rotation by q is
Ry(q).

Each segment is also represented by the four-joint augmented rigid chain
(revolute, prismatic, prismatic, revolute) whose endpoints coincide with the
arc. Segment mass is lumped half at the chord midpoint and half at the
segment end (the frames of the two prismatic links).
"""

import math
from dataclasses import dataclass

import numpy as np

from .params import ArmParams
from .spatial import homogeneous2, rot_y, rot_z

# the direct formulas lose about eps / q^2 to cancellation, so the series covers up to 0.1
SERIES_EPS = 0.1
_SERIES_TERMS = 6
FD_STEP = 1e-6


# -- sin(q)/q-type functions, vectorised, with Taylor branches at |q| < SERIES_EPS


def _split(q):
    q = np.asarray(q, dtype=float)
    small = np.abs(q) < SERIES_EPS
    return q, small, np.where(small, 1.0, q)


def _series(coeffs, q2):
    out = coeffs[-1]
    for c in coeffs[-2::-1]:
        out = out * q2 + c
    return out


# Taylor coefficients in powers of q^2; six terms keep the truncation below 1e-20 at |q| = 0.1
_N = np.arange(_SERIES_TERMS)
_F = np.array([math.factorial(k) for k in range(2 * _SERIES_TERMS + 4)], dtype=float)
_SIGN = (-1.0) ** _N
_SINC = _SIGN / _F[2 * _N + 1]
_DSINC = -_SIGN * 2 * (_N + 1) / _F[2 * _N + 3]  # times q
_DDSINC = -_SIGN * 2 * (_N + 1) * (2 * _N + 1) / _F[2 * _N + 3]
_COSC = _SIGN / _F[2 * _N + 2]  # times q
_DCOSC = _SIGN * (2 * _N + 1) / _F[2 * _N + 2]


def _pick(small, series, direct):
    return np.where(small, series(), direct) if small.any() else direct


def sinc(q):
    """sin(q) / q"""
    q, small, qs = _split(q)
    return _pick(small, lambda: _series(_SINC, q * q), np.sin(qs) / qs)


def dsinc(q):
    q, small, qs = _split(q)
    return _pick(small, lambda: q * _series(_DSINC, q * q), (qs * np.cos(qs) - np.sin(qs)) / qs**2)


def ddsinc(q):
    q, small, qs = _split(q)
    direct = -(qs**2 * np.sin(qs) + 2.0 * qs * np.cos(qs) - 2.0 * np.sin(qs)) / qs**3
    return _pick(small, lambda: _series(_DDSINC, q * q), direct)


def cosc(q):
    """(1 - cos(q)) / q"""
    q, small, qs = _split(q)
    return _pick(small, lambda: q * _series(_COSC, q * q), (1.0 - np.cos(qs)) / qs)


def dcosc(q):
    q, small, qs = _split(q)
    direct = (qs * np.sin(qs) - 1.0 + np.cos(qs)) / qs**2
    return _pick(small, lambda: _series(_DCOSC, q * q), direct)


@dataclass(frozen=True)
class SegmentConfig:
    q: float
    L: float
    q_max: float = np.pi

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"segment length must be positive, got {self.L}")
        if abs(self.q) > self.q_max + 1e-12:
            raise ValueError(f"curvature angle {self.q} outside joint limit {self.q_max}")


@dataclass(frozen=True)
class ArmConfig:
    q1: float
    q2: float
    dq1: float = 0.0
    dq2: float = 0.0

    @property
    def q(self):
        return np.array([self.q1, self.q2])

    @property
    def dq(self):
        return np.array([self.dq1, self.dq2])

    def segments(self, params: ArmParams):
        return (
            SegmentConfig(self.q1, params.L1, params.q_max),
            SegmentConfig(self.q2, params.L2, params.q_max),
        )


@dataclass(frozen=True)
class ArmDynamicsTerms:
    B: np.ndarray
    C: np.ndarray
    g: np.ndarray
    J: np.ndarray


# -- single segment


def arc_endpoint(q, L):
    """Planar endpoint [L sin q / q, L (1 - cos q) / q] of a constant-curvature segment."""
    return L * np.array([sinc(q), cosc(q)])


def arc_point(q, L, s):
    """Point at arclength fraction s in [0, 1] along the segment."""
    return arc_endpoint(q * s, L * s)


def pcc_transform(seg: SegmentConfig):
    return homogeneous2(seg.q, arc_endpoint(seg.q, seg.L))


def half_chord(q, L):
    """L sin(q/2) / q, the length of each prismatic link of the augmented chain."""
    return 0.5 * L * sinc(0.5 * q)


def half_chord_dq(q, L):
    """d/dq of half_chord, written out in closed form as L (q cos(q/2) - 2 sin(q/2)) / (2 q^2)."""
    return 0.25 * L * dsinc(0.5 * q)


def half_chord_dqq(q, L):
    return 0.125 * L * ddsinc(0.5 * q)


def augmented_map(seg: SegmentConfig):
    f = float(half_chord(seg.q, seg.L))
    return np.array([seg.q / 2, f, f, seg.q / 2])


def jacobian_m(seg: SegmentConfig):
    lc = float(half_chord_dq(seg.q, seg.L))
    return np.array([0.5, lc, lc, 0.5])


def arm_augmented_map(arm: ArmConfig, params: ArmParams):
    s1, s2 = arm.segments(params)
    return np.concatenate([augmented_map(s1), augmented_map(s2)])


def arm_jacobian_m(arm: ArmConfig, params: ArmParams):
    """8x2 block-diagonal Jacobian of the stacked augmented map."""
    s1, s2 = arm.segments(params)
    J = np.zeros((8, 2))
    J[:4, 0] = jacobian_m(s1)
    J[4:, 1] = jacobian_m(s2)
    return J


def arm_jacobian_m_dot(arm: ArmConfig, params: ArmParams):
    J = np.zeros((8, 2))
    d1 = float(half_chord_dqq(arm.q1, params.L1)) * arm.dq1
    d2 = float(half_chord_dqq(arm.q2, params.L2)) * arm.dq2
    J[1:3, 0] = d1
    J[5:7, 1] = d2
    return J


# -- Denavit-Hartenberg chain

# Rotation from the DH base frame to the arm frame. In the DH frame the
# unbent arm points along -y and bends about z towards +x.
DH_BASE = np.array([[0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, 0.0, 0.0]])

# (a, alpha, joint type) per augmented link
_DH_LINKS = ((0.0, np.pi / 2, "R"), (0.0, 0.0, "P"), (0.0, -np.pi / 2, "P"), (0.0, 0.0, "R"))


def dh_transform(a, alpha, d, theta):
    """Standard DH link transform Rz(theta) Tz(d) Tx(a) Rx(alpha)."""
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, a * ct],
            [st, ct * ca, -ct * sa, a * st],
            [0.0, sa, ca, d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def dh_params(seg: SegmentConfig):
    """(a, alpha, d, theta) rows of the augmented segment."""
    xi = augmented_map(seg)
    return [(0.0, np.pi / 2, 0.0, xi[0]), (0.0, 0.0, xi[1], 0.0), (0.0, -np.pi / 2, xi[2], 0.0), (0.0, 0.0, 0.0, xi[3])]


def dh_chain(seg: SegmentConfig):
    return [dh_transform(*row) for row in dh_params(seg)]


def compose(transforms):
    T = np.eye(transforms[0].shape[0])
    for link in transforms:
        T = T @ link
    return T


def dh_to_arm_frame(T):
    """Express a DH-frame transform in the arm frame (x along the arm, z up)."""
    E = np.eye(4)
    E[:3, :3] = DH_BASE
    return E @ T @ E.T


def embed_planar(T2):
    """Lift a planar (s, w) transform into the arm frame."""
    q = np.arctan2(T2[1, 0], T2[0, 0])
    T = np.eye(4)
    T[:3, :3] = rot_y(q)
    T[:3, 3] = [T2[0, 2], 0.0, -T2[1, 2]]
    return T


def _augmented_frames(xi):
    """Frames of the 8-joint augmented chain (DH base coordinates).

    Returns the list of 9 frames (base plus one per joint) as 4x4 arrays.
    """
    frames = [np.eye(4)]
    T = np.eye(4)
    for k in range(8):
        a, alpha, kind = _DH_LINKS[k % 4]
        d, theta = (xi[k], 0.0) if kind == "P" else (0.0, xi[k])
        T = T @ dh_transform(a, alpha, d, theta)
        frames.append(T)
    return frames


# frame indices (into _augmented_frames) carrying the lumped masses
_MASS_FRAMES = (2, 3, 6, 7)


def augmented_point_jacobians(xi):
    """Positions (4, 3) and Jacobians (4, 3, 8) of the lumped masses w.r.t. xi, in DH base coordinates."""
    frames = _augmented_frames(xi)
    pos = np.array([frames[k][:3, 3] for k in _MASS_FRAMES])
    jac = np.zeros((4, 3, 8))
    for n, k in enumerate(_MASS_FRAMES):
        p = frames[k][:3, 3]
        for j in range(k):
            z = frames[j][:3, 2]
            if _DH_LINKS[j % 4][2] == "R":
                jac[n, :, j] = np.cross(z, p - frames[j][:3, 3])
            else:
                jac[n, :, j] = z
    return pos, jac


def augmented_inertia(xi, params: ArmParams):
    _, jac = augmented_point_jacobians(xi)
    m = params.point_masses
    return np.einsum("k,kia,kib->ab", m, jac, jac)


def augmented_gravity(xi, params: ArmParams, gravity_dh):
    """Gradient of the potential, -sum m J^T g."""
    _, jac = augmented_point_jacobians(xi)
    m = params.point_masses
    return -np.einsum("k,kia,i->a", m, jac, gravity_dh)


def christoffel_bias(inertia_fn, x, dx, h=FD_STEP):
    """C(x, dx) from Christoffel symbols of a configuration-dependent inertia, by central differences."""
    n = len(x)
    dB = np.empty((n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        dB[k] = (inertia_fn(x + e) - inertia_fn(x - e)) / (2 * h)
    # Gamma_ijk = 0.5 (dB_ij/dx_k + dB_ik/dx_j - dB_jk/dx_i);  C_ij = sum_k Gamma_ijk dx_k
    term1 = np.einsum("kij,k->ij", dB, dx)
    term2 = np.einsum("jik,k->ij", dB, dx)
    term3 = np.einsum("ijk,k->ij", dB, dx)
    return 0.5 * (term1 + term2 - term3)


def _gravity_in_dh(base_rotation, mount_angle, gravity):
    R = (np.eye(3) if base_rotation is None else np.asarray(base_rotation)) @ rot_z(mount_angle)
    g_arm = R.T @ np.array([0.0, 0.0, -gravity])
    return DH_BASE.T @ g_arm


def _projected_inertia(q, params):
    arm = ArmConfig(q[0], q[1])
    Jm = arm_jacobian_m(arm, params)
    return Jm.T @ augmented_inertia(arm_augmented_map(arm, params), params) @ Jm


def arm_dynamics(arm: ArmConfig, params: ArmParams, base_rotation=None, mount_angle=0.0, gravity=9.81):
    """Projected (2-DOF) dynamics terms of a single arm on a fixed base.

    The base orientation only enters through the direction of gravity.
    C is built from the Christoffel symbols of the projected inertia.
    """
    xi = arm_augmented_map(arm, params)
    Jm = arm_jacobian_m(arm, params)
    B = Jm.T @ augmented_inertia(xi, params) @ Jm
    g = Jm.T @ augmented_gravity(xi, params, _gravity_in_dh(base_rotation, mount_angle, gravity))
    C = christoffel_bias(lambda x: _projected_inertia(x, params), arm.q, arm.dq)
    _, jac = augmented_point_jacobians(xi)
    J = DH_BASE @ jac[-1] @ Jm
    return ArmDynamicsTerms(B=B, C=C, g=g, J=J)


def arm_coriolis_composed(arm: ArmConfig, params: ArmParams):
    """J_m^T B_xi dJ_m + J_m^T C_xi J_m, the projection of the augmented-chain Coriolis matrix."""
    xi = arm_augmented_map(arm, params)
    Jm = arm_jacobian_m(arm, params)
    dxi = Jm @ arm.dq
    C_xi = christoffel_bias(lambda x: augmented_inertia(x, params), xi, dxi)
    return Jm.T @ augmented_inertia(xi, params) @ arm_jacobian_m_dot(arm, params) + Jm.T @ C_xi @ Jm


# -- closed-form planar geometry (used by the full-body model and the controller)


def arm_planar_points(q1, q2, params: ArmParams):
    """Lumped-mass positions and their derivatives in planar arm coordinates.

    Accepts scalars or equally shaped arrays. Returns ``pos`` with shape
    (..., 4, 2) and ``dpos`` with shape (..., 4, 2, 2) where the last axis
    is d/d(q1, q2). Point order: seg1 midpoint, seg1 end, seg2 midpoint,
    seg2 end.
    """
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    L1, L2 = params.L1, params.L2
    P1 = L1 * np.stack([sinc(q1), cosc(q1)], axis=-1)
    dP1 = L1 * np.stack([dsinc(q1), dcosc(q1)], axis=-1)
    P2 = L2 * np.stack([sinc(q2), cosc(q2)], axis=-1)
    dP2 = L2 * np.stack([dsinc(q2), dcosc(q2)], axis=-1)
    c, s = np.cos(q1), np.sin(q1)
    R1 = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    dR1 = np.stack([np.stack([-s, -c], -1), np.stack([c, -s], -1)], -2)
    R1P2 = np.einsum("...ij,...j->...i", R1, P2)
    dR1P2 = np.einsum("...ij,...j->...i", dR1, P2)
    R1dP2 = np.einsum("...ij,...j->...i", R1, dP2)

    pos = np.stack([0.5 * P1, P1, P1 + 0.5 * R1P2, P1 + R1P2], axis=-2)
    zero = np.zeros_like(P1)
    d_q1 = np.stack([0.5 * dP1, dP1, dP1 + 0.5 * dR1P2, dP1 + dR1P2], axis=-2)
    d_q2 = np.stack([zero, zero, 0.5 * R1dP2, R1dP2], axis=-2)
    dpos = np.stack([d_q1, d_q2], axis=-1)
    return pos, dpos


def end_effector_planar(q1, q2, params: ArmParams):
    T = pcc_transform(SegmentConfig(q1, params.L1, params.q_max)) @ pcc_transform(
        SegmentConfig(q2, params.L2, params.q_max)
    )
    return T[:2, 2]


def lateral_position(q1, q2, params: ArmParams):
    """Bending-direction coordinate of the end-effector and its gradient w.r.t. (q1, q2)."""
    pos, dpos = arm_planar_points(q1, q2, params)
    return float(pos[3, 1]), dpos[3, 1, :].copy()


def planar_to_arm(p):
    """(s, w) -> arm-frame 3-vector; works on (..., 2) arrays."""
    p = np.asarray(p, dtype=float)
    return np.stack([p[..., 0], np.zeros_like(p[..., 0]), -p[..., 1]], axis=-1)
