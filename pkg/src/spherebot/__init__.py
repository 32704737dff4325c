"""Dynamics, path-tracking control and simulation of a thruster-driven spherical robot
rolling on smooth terrain."""

from .allocation import ThrusterSet, thrusts_to_torques, torques_to_thrusts
from .control import ControllerGains, ReferencePath, TrackingError, control_step, tracking_error
from .dynamics import (
    RobotParams,
    RobotState,
    TorqueCommand,
    accel_to_torque,
    body_angular_accel,
    canonical_2rsr,
    canonical_3rsr,
    canonical_rtsr,
    kinematic_map,
    slope_angular_accel,
)
from .frames import EulerPose, body_frame, rot_ypr, surface_jet, tangent_basis, xi_transform
from .inertia import InertiaTensor, contact_inertia, parallel_axis, solid_sphere_inertia
from .sim import SimConfig, SimTrace, run, scenario_circle, scenario_ramp, step
from .terrain import CosineTerrain, GaussianBump, Plane, Ramp, flat

__version__ = "0.1.0"

__all__ = [
    "ThrusterSet", "thrusts_to_torques", "torques_to_thrusts",
    "ControllerGains", "ReferencePath", "TrackingError", "control_step", "tracking_error",
    "RobotParams", "RobotState", "TorqueCommand", "accel_to_torque", "body_angular_accel",
    "canonical_2rsr", "canonical_3rsr", "canonical_rtsr", "kinematic_map",
    "slope_angular_accel",
    "EulerPose", "body_frame", "rot_ypr", "surface_jet", "tangent_basis", "xi_transform",
    "InertiaTensor", "contact_inertia", "parallel_axis", "solid_sphere_inertia",
    "SimConfig", "SimTrace", "run", "scenario_circle", "scenario_ramp", "step",
    "CosineTerrain", "GaussianBump", "Plane", "Ramp", "flat",
]
