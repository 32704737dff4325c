"""Six-thruster torque allocation.

Three diametrically opposite thruster pairs sit on the body axes at distance
``l`` from the centre. Each pair fires equal and opposite thrusts, forming a
force couple with zero net force and moment ``2 l F`` about one body axis:

====  ==========  ===========
No.   position    thrust
====  ==========  ===========
1     ( 0,  l, 0)  (0, 0,  F_X)
2     ( 0, -l, 0)  (0, 0, -F_X)
3     ( 0, 0,  l)  ( F_Y, 0, 0)
4     ( 0, 0, -l)  (-F_Y, 0, 0)
5     ( l, 0, 0)   (0,  F_Z, 0)
6     (-l, 0, 0)   (0, -F_Z, 0)
====  ==========  ===========
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import TorqueCommand
from .inertia import InvalidParameter


@dataclass(frozen=True)
class ThrusterSet:
    f: np.ndarray                 # pair thrusts (F_X, F_Y, F_Z), newtons
    f_max: float = math.inf
    saturated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "f", np.asarray(self.f, dtype=float).reshape(3))


def thruster_layout(l: float, f) -> tuple[np.ndarray, np.ndarray]:
    """Positions and thrust vectors of the six thrusters, one per row."""
    fx, fy, fz = (float(v) for v in f)
    pos = np.array([
        [0.0, l, 0.0], [0.0, -l, 0.0],
        [0.0, 0.0, l], [0.0, 0.0, -l],
        [l, 0.0, 0.0], [-l, 0.0, 0.0],
    ])
    thrust = np.array([
        [0.0, 0.0, fx], [0.0, 0.0, -fx],
        [fy, 0.0, 0.0], [-fy, 0.0, 0.0],
        [0.0, fz, 0.0], [0.0, -fz, 0.0],
    ])
    return pos, thrust


def torques_to_thrusts(tau, l: float, f_max: float = math.inf) -> ThrusterSet:
    if not l > 0:
        raise InvalidParameter(f"lever arm must be positive, got {l}")
    if not f_max > 0:
        raise InvalidParameter(f"f_max must be positive, got {f_max}")
    t = tau.tau if isinstance(tau, TorqueCommand) else np.asarray(tau, dtype=float)
    f = t / (2.0 * l)
    clipped = np.clip(f, -f_max, f_max)
    return ThrusterSet(clipped, f_max, bool(np.any(clipped != f)))


def net_force(thrusters: ThrusterSet, l: float) -> np.ndarray:
    _, thrust = thruster_layout(l, thrusters.f)
    return thrust.sum(axis=0)


def thrusts_to_torques(thrusters: ThrusterSet, l: float) -> TorqueCommand:
    """Sum of ``r_i x F_i`` over the six thrusters."""
    if not l > 0:
        raise InvalidParameter(f"lever arm must be positive, got {l}")
    pos, thrust = thruster_layout(l, thrusters.f)
    force = thrust.sum(axis=0)
    if np.any(np.abs(force) > 1e-12 * max(1.0, float(np.abs(thrust).max()))):
        raise AssertionError(f"thruster layout produced net force {force}")
    return TorqueCommand(np.cross(pos, thrust).sum(axis=0))
