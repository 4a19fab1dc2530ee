"""Physical and algorithmic parameter groups.

Every number here is a configurable default: the modeled platform has no
published mass/inertia/gain values, so these were picked to give a
desk-scale hexarotor of plausible proportions.
"""

from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.81


@dataclass(frozen=True)
class ArmParams:
    """Soft arm: two constant-curvature segments, propeller at the end of segment 1."""

    L1: float = 0.20
    L2: float = 0.10
    m1: float = 0.05
    m2: float = 0.03
    m_prop: float = 0.06
    stiffness: float = 2.0  # N m / rad, on each curvature angle
    damping: float = 0.01  # N m s / rad
    rest_angle: float = 0.5  # spring-neutral curvature angle [rad]
    q_max: float = np.pi

    def __post_init__(self):
        for name in ("L1", "L2", "q_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"arm.{name} must be positive")
        for name in ("m1", "m2", "m_prop", "stiffness", "damping"):
            if getattr(self, name) < 0:
                raise ValueError(f"arm.{name} must be non-negative")

    @property
    def mass(self):
        return self.m1 + self.m2 + self.m_prop

    @property
    def point_masses(self):
        """Masses at [seg1 chord midpoint, seg1 end (+propeller), seg2 chord midpoint, seg2 end]."""
        return np.array([self.m1 / 2, self.m1 / 2 + self.m_prop, self.m2 / 2, self.m2 / 2])


@dataclass(frozen=True)
class PlatformParams:
    mass: float = 1.2
    inertia: tuple = (0.012, 0.012, 0.020)
    pitch_guard_deg: float = 75.0

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("platform.mass must be positive")
        if len(self.inertia) != 3 or min(self.inertia) <= 0:
            raise ValueError("platform.inertia must be three positive principal moments")
        if not 0 < self.pitch_guard_deg < 90:
            raise ValueError("platform.pitch_guard_deg must lie in (0, 90)")

    @property
    def inertia_matrix(self):
        return np.diag(np.asarray(self.inertia, dtype=float))


@dataclass(frozen=True)
class PropellerParams:
    alpha_deg: float = 20.0
    arm_length: float = 0.30  # rigid arms
    c_tau: float = 0.016  # drag-to-thrust ratio [m]
    c_f: float = 1.5e-5  # thrust coefficient [N s^2 / rad^2], only used to report spin speeds
    f_max: float = 8.0

    def __post_init__(self):
        for name in ("arm_length", "c_tau", "c_f", "f_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"propeller.{name} must be positive")

    @property
    def alpha(self):
        return np.deg2rad(self.alpha_deg)


@dataclass(frozen=True)
class RobotParams:
    platform: PlatformParams = field(default_factory=PlatformParams)
    arm: ArmParams = field(default_factory=ArmParams)
    propeller: PropellerParams = field(default_factory=PropellerParams)

    @property
    def total_mass(self):
        return self.platform.mass + 3 * self.arm.mass
