"""Soft-arm multirotor: kinematics, dynamics, control and jumping simulations."""

from .params import ArmParams, PlatformParams, PropellerParams, RobotParams
from .sim import Experiment, SimConfig, gravity_sweep, run_jump_experiment

__all__ = [
    "ArmParams",
    "Experiment",
    "PlatformParams",
    "PropellerParams",
    "RobotParams",
    "SimConfig",
    "gravity_sweep",
    "run_jump_experiment",
]
