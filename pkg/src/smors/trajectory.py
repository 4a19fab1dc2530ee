"""Bouncing-ball reference: ballistic arcs at reduced gravity joined by soft stance phases.

The reference starts at the apex of a hop and moves forward at constant
speed. Each stance is a half-cosine velocity reversal, so the vertical
velocity is continuous at touchdown and lift-off, and the compression depth
follows from the touchdown speed and stance duration.

The hop is fixed either by its length (constant hop period, the apex grows
with the gravity fraction) or by its apex height (the period shrinks as the
gravity fraction grows). With ``g_frac = 0`` the reference is a level
translation at the apex height of the full-gravity hop.
"""

import csv
from dataclasses import dataclass, replace

import numpy as np

from .params import GRAVITY
from .spatial import rot_to_quat, vee

V_EPS = 1e-6


@dataclass(frozen=True)
class TrajectoryParams:
    hop_length: float | None = 6.72  # forward distance per hop [m]; fixes the hop period
    apex_height: float | None = None  # above the touchdown height [m]; used when hop_length is None
    stance_duration: float = 0.3
    forward_speed: float = 16.0
    g_frac: float = 0.3
    n_hops: int = 0  # number of stances, 0 = hop for the whole run
    touchdown_height: float = 0.118  # body height at which a stance starts [m]
    start_x: float = 0.0

    def __post_init__(self):
        if (self.hop_length is None) == (self.apex_height is None):
            raise ValueError("exactly one of hop_length and apex_height must be set")
        if self.apex_height is not None and not self.apex_height > 0:
            raise ValueError(f"apex_height must be positive, got {self.apex_height}")
        if not self.stance_duration > 0:
            raise ValueError("stance_duration must be positive")
        if not self.forward_speed > 0:
            raise ValueError("forward_speed must be positive")
        if self.hop_length is not None and not self.hop_length > self.forward_speed * self.stance_duration:
            raise ValueError("hop_length must exceed the distance covered during a stance")
        if not self.touchdown_height > 0:
            raise ValueError("touchdown_height must be positive")
        if not 0.0 <= self.g_frac <= 1.0:
            raise ValueError(f"g_frac must lie in [0, 1], got {self.g_frac}")
        if self.n_hops < 0:
            raise ValueError("n_hops must be non-negative")

    @property
    def hopping(self):
        return self.g_frac > 0.0

    @property
    def hop_apex(self):
        """Apex above the touchdown height for the current gravity fraction."""
        if self.hop_length is None:
            return self.apex_height
        t = self.hop_length / self.forward_speed - self.stance_duration
        return self.g_frac * GRAVITY * t * t / 8.0

    @property
    def touchdown_speed(self):
        return float(np.sqrt(2.0 * self.g_frac * GRAVITY * self.hop_apex))

    @property
    def airborne_duration(self):
        if self.hop_length is not None:
            return self.hop_length / self.forward_speed - self.stance_duration
        if not self.hopping:
            return np.inf
        return 2.0 * np.sqrt(2.0 * self.apex_height / (self.g_frac * GRAVITY))

    @property
    def compression_depth(self):
        return self.touchdown_speed * self.stance_duration / np.pi

    @property
    def hop_period(self):
        return self.airborne_duration + self.stance_duration

    @property
    def apex_z(self):
        if not self.hopping:
            return self.touchdown_height + replace(self, g_frac=1.0).hop_apex
        return self.touchdown_height + self.hop_apex


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    j: np.ndarray
    R: np.ndarray
    omega: np.ndarray
    domega: np.ndarray
    stance: bool


def _normalize_with_derivatives(u, du, ddu):
    r = np.linalg.norm(u)
    n = u / r
    rdot = n @ du
    dn = (du - n * rdot) / r
    ddn = (ddu - dn * rdot - n * (dn @ du + n @ ddu)) / r - dn * rdot / r
    return n, dn, ddn


def desired_orientation(v, a=None, j=None):
    """Frame with x along the velocity and y kept horizontal, plus body rate and acceleration.

    Returns ``None`` when the velocity is too small to define a direction;
    callers hold the previous orientation.
    """
    v = np.asarray(v, dtype=float)
    a = np.zeros(3) if a is None else np.asarray(a, dtype=float)
    j = np.zeros(3) if j is None else np.asarray(j, dtype=float)
    if np.linalg.norm(v) < V_EPS:
        return None
    ey = np.array([0.0, 1.0, 0.0])
    x, dx, ddx = _normalize_with_derivatives(v, a, j)
    w, dw, ddw = np.cross(x, ey), np.cross(dx, ey), np.cross(ddx, ey)
    if np.linalg.norm(w) < V_EPS:
        return None
    z, dz, ddz = _normalize_with_derivatives(w, dw, ddw)
    y = np.cross(z, x)
    dy = np.cross(dz, x) + np.cross(z, dx)
    ddy = np.cross(ddz, x) + 2.0 * np.cross(dz, dx) + np.cross(z, ddx)
    R = np.column_stack([x, y, z])
    dR = np.column_stack([dx, dy, dz])
    ddR = np.column_stack([ddx, ddy, ddz])
    W = R.T @ dR
    omega = vee(0.5 * (W - W.T))
    dW = dR.T @ dR + R.T @ ddR
    domega = vee(0.5 * (dW - dW.T))
    return R, omega, domega


class Trajectory:
    """Analytic reference, evaluated at arbitrary times."""

    def __init__(self, params: TrajectoryParams):
        self.params = params
        self._last_R = np.eye(3)

    def vertical(self, t):
        """(z, zdot, zddot, zdddot, stance) at time t."""
        P = self.params
        g = P.g_frac * GRAVITY
        if not P.hopping:
            return P.apex_z, 0.0, 0.0, 0.0, False
        half = 0.5 * P.airborne_duration
        if t < half:
            return P.apex_z - 0.5 * g * t * t, -g * t, -g, 0.0, False
        tau = t - half
        vt = P.touchdown_speed
        if P.n_hops:
            last_liftoff = (P.n_hops - 1) * P.hop_period + P.stance_duration
            if tau >= last_liftoff:
                ta = min(tau - last_liftoff, half)
                return P.touchdown_height + vt * ta - 0.5 * g * ta * ta, vt - g * ta, (-g if ta < half else 0.0), 0.0, False
        k = int(tau // P.hop_period)
        tp = tau - k * P.hop_period
        if tp < P.stance_duration:
            w = np.pi / P.stance_duration
            s, c = np.sin(w * tp), np.cos(w * tp)
            return P.touchdown_height - vt * s / w, -vt * c, vt * w * s, vt * w * w * c, True
        ta = tp - P.stance_duration
        return P.touchdown_height + vt * ta - 0.5 * g * ta * ta, vt - g * ta, -g, 0.0, False

    def sample(self, t):
        P = self.params
        z, dz, ddz, dddz, stance = self.vertical(t)
        p = np.array([P.start_x + P.forward_speed * t, 0.0, z])
        v = np.array([P.forward_speed, 0.0, dz])
        a = np.array([0.0, 0.0, ddz])
        j = np.array([0.0, 0.0, dddz])
        frame = desired_orientation(v, a, j)
        if frame is None:
            R, omega, domega = self._last_R, np.zeros(3), np.zeros(3)
        else:
            R, omega, domega = frame
            self._last_R = R
        return TrajectorySample(t=t, p=p, v=v, a=a, j=j, R=R, omega=omega, domega=domega, stance=stance)

    def generate(self, dt, duration):
        n = int(round(duration / dt)) + 1
        return [self.sample(k * dt) for k in range(n)]


class HoverReference:
    """Constant pose reference at ``p`` with heading ``yaw``."""

    def __init__(self, p=(0.0, 0.0, 1.0), yaw=0.0):
        self.p = np.asarray(p, dtype=float)
        c, s = np.cos(yaw), np.sin(yaw)
        self.R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def sample(self, t):
        z = np.zeros(3)
        return TrajectorySample(t=t, p=self.p.copy(), v=z, a=z, j=z, R=self.R, omega=z, domega=z, stance=False)


def generate(params: TrajectoryParams, dt=0.002, duration=10.0):
    return Trajectory(params).generate(dt, duration)


def write_csv(samples, path):
    header = ["t", "p_x", "p_y", "p_z", "v_x", "v_y", "v_z", "a_x", "a_y", "a_z"]
    header += ["q_w", "q_x", "q_y", "q_z", "w_x", "w_y", "w_z"]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for s in samples:
            row = [s.t, *s.p, *s.v, *s.a, *rot_to_quat(s.R), *s.omega]
            out.writerow([repr(float(x)) for x in row])

