"""Pure-pursuit path tracking for the three rolling models.

Each mode law maps a tracking error (distance and deviation angle) to angle
accelerations ``(Theta'', Phi'', Psi'')``; :func:`control_update` samples the
reference, evaluates the law and inverts the dynamics for the body torque.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .dynamics import RobotParams, RobotState, TorqueCommand, accel_to_torque, normalize_model
from .frames import BodyFrameBasis, SurfaceJet, TangentBasis, body_frame
from .terrain import TerrainSurface

EPS_PROJ = 1e-9


@dataclass(frozen=True)
class ControllerGains:
    k_theta: float = 2.0
    k_theta1: float = 2.0
    k_theta2: float = 0.5
    k_phi: float = 2.0
    k_phi1: float = 2.0
    k_phi2: float = 0.5
    k_psi: float = 1.5
    k_e: float = 0.5

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"gains.{f.name} must be positive, got {value}")


@dataclass(frozen=True)
class TrackingError:
    """Position error and deviation angle.

    ``zeta_steer`` optionally replaces ``zeta_dev`` in the direction-only
    terms of the mode laws (those not weighted by the error magnitude).
    """

    e_t: np.ndarray
    zeta_dev: float
    zeta_steer: float | None = None

    @property
    def steer(self) -> float:
        return self.zeta_dev if self.zeta_steer is None else self.zeta_steer

    @property
    def norm(self) -> float:
        e = self.e_t
        return math.hypot(float(e[0]), float(e[1]), float(e[2]))


class ReferencePath:
    """Time-parametrised path lying on a surface.

    ``planar(t)`` returns ``(xy, xy_dot, xy_ddot)``; height and its derivatives
    follow from the surface.
    """

    def __init__(self, surface: TerrainSurface,
                 planar: Callable[[float], tuple[np.ndarray, np.ndarray, np.ndarray]],
                 duration: float = math.inf, description: dict | None = None):
        self.surface = surface
        self._planar = planar
        self.duration = duration
        self.description = description or {}

    def _z_dot(self, t: float) -> float:
        xy, xy_dot, _ = self._planar(t)
        _, fx, fy = self.surface.evaluate(xy[0], xy[1])
        return fx * xy_dot[0] + fy * xy_dot[1]

    def point(self, t: float) -> np.ndarray:
        xy, _, _ = self._planar(t)
        return np.array([xy[0], xy[1], self.surface.height(xy[0], xy[1])])

    def velocity(self, t: float) -> np.ndarray:
        _, xy_dot, _ = self._planar(t)
        return np.array([xy_dot[0], xy_dot[1], self._z_dot(t)])

    def sample(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Point on the path and its second time derivative."""
        p, _, acc = self.kinematics(t)
        return p, acc

    def kinematics(self, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Point, velocity and acceleration at ``t``.

        The vertical acceleration is a central difference of the vertical
        velocity (step 1e-5 s), so surfaces only need first derivatives.
        """
        xy, xy_dot, xy_ddot = self._planar(t)
        z, fx, fy = self.surface.evaluate(xy[0], xy[1])
        h = 1e-5
        z_ddot = (self._z_dot(t + h) - self._z_dot(t - h)) / (2.0 * h)
        return (np.array([xy[0], xy[1], z]),
                np.array([xy_dot[0], xy_dot[1], fx * xy_dot[0] + fy * xy_dot[1]]),
                np.array([xy_ddot[0], xy_ddot[1], z_ddot]))


def straight_line(surface: TerrainSurface, start=(0.0, 0.0), heading: float = 0.0,
                  speed: float = 0.5, duration: float = math.inf) -> ReferencePath:
    """Constant horizontal speed along ``heading`` (radians from +x)."""
    u = np.array([math.cos(heading), math.sin(heading)])
    x0 = np.asarray(start, dtype=float)
    zero = np.zeros(2)

    def planar(t):
        return x0 + speed * t * u, speed * u, zero

    return ReferencePath(surface, planar, duration,
                         {"kind": "line", "start": list(map(float, x0)),
                          "heading": heading, "speed": speed})


def circle(surface: TerrainSurface, center=(5.0, 5.0), radius: float = 1.0,
           period: float = 10.0, duration: float = math.inf) -> ReferencePath:
    """``x = cx + r sin(w t)``, ``y = cy + r cos(w t)`` with ``w = 2 pi / period``."""
    cx, cy = (float(c) for c in center)
    w = 2.0 * math.pi / period

    def planar(t):
        s, c = math.sin(w * t), math.cos(w * t)
        return (np.array([cx + radius * s, cy + radius * c]),
                np.array([radius * w * c, -radius * w * s]),
                np.array([-radius * w * w * s, -radius * w * w * c]))

    return ReferencePath(surface, planar, duration,
                         {"kind": "circle", "center": [cx, cy], "radius": radius,
                          "period": period})


def waypoints(surface: TerrainSurface, times, points) -> ReferencePath:
    """Cubic time-parametrisation through ``points`` (N x 2), at rest at both ends.

    Outside ``[times[0], times[-1]]`` the path holds its end points.
    """
    times = np.asarray(times, dtype=float)
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) != len(times) or len(times) < 2:
        raise ValueError("waypoints need matching times and (N, 2) points, N >= 2")
    spline = CubicSpline(times, pts, bc_type="clamped")
    d1, d2 = spline.derivative(1), spline.derivative(2)
    t0, t1 = times[0], times[-1]
    zero = np.zeros(2)

    def planar(t):
        if t <= t0:
            return pts[0].copy(), zero, zero
        if t >= t1:
            return pts[-1].copy(), zero, zero
        return spline(t), d1(t), d2(t)

    return ReferencePath(surface, planar, t1,
                         {"kind": "waypoints", "times": times.tolist(),
                          "points": pts.tolist()})


def _bearing(e0: float, e1: float, e2: float, basis: BodyFrameBasis) -> float:
    a = basis.a
    n0, n1, n2 = a[0, 2], a[1, 2], a[2, 2]
    h0, h1, h2 = a[0, 0], a[1, 0], a[2, 0]
    en = e0 * n0 + e1 * n1 + e2 * n2
    q0, q1, q2 = e0 - en * n0, e1 - en * n1, e2 - en * n2
    if math.sqrt(q0 * q0 + q1 * q1 + q2 * q2) < EPS_PROJ:
        return 0.0
    triple = (n0 * (h1 * q2 - h2 * q1) + n1 * (h2 * q0 - h0 * q2)
              + n2 * (h0 * q1 - h1 * q0))   # n . (h x e_proj)
    return math.atan2(triple, h0 * q0 + h1 * q1 + h2 * q2)


def tracking_error(state: RobotState, target, basis: BodyFrameBasis,
                   origin=None) -> TrackingError:
    """Position error to ``target`` and the signed deviation angle from ``h``.

    The deviation is measured in the tangent plane, counter-clockwise about
    ``n``; it is zero when the projected error is shorter than ``EPS_PROJ``.
    ``origin`` replaces the contact point as the reference position.
    """
    p = state.p0 if origin is None else origin
    e_t = np.asarray(target, dtype=float) - p
    return TrackingError(e_t, _bearing(float(e_t[0]), float(e_t[1]), float(e_t[2]), basis))


def _soft(err: TrackingError, k_e: float) -> float:
    d = err.norm
    return d / (k_e + d)


def ctrl_3rsr(err: TrackingError, path_accel: float, gains: ControllerGains,
              radius: float) -> tuple[float, float, float]:
    sat, z, zs = _soft(err, gains.k_e), err.zeta_dev, err.steer
    theta = gains.k_theta * sat * math.cos(z) + path_accel / radius
    phi = -(gains.k_phi * sat * math.sin(z) + gains.k_phi2 * math.sin(zs))
    return theta, phi, gains.k_psi * zs


def ctrl_2rsr(err: TrackingError, gains: ControllerGains) -> tuple[float, float, float]:
    sat, z, zs = _soft(err, gains.k_e), err.zeta_dev, err.steer
    theta = gains.k_theta1 * sat * math.cos(z) + gains.k_theta2 * math.cos(zs)
    phi = -(gains.k_phi1 * sat * math.sin(z) + gains.k_phi2 * math.sin(zs))
    return theta, phi, 0.0


def ctrl_rtsr(err: TrackingError, path_accel: float, gains: ControllerGains,
              radius: float) -> tuple[float, float, float]:
    sat, z, zs = _soft(err, gains.k_e), err.zeta_dev, err.steer
    theta = gains.k_theta * sat * math.cos(z) + path_accel / radius
    return theta, 0.0, gains.k_psi * zs


FEEDFORWARD = ("tangential", "norm")


def line_deviation(zeta: float) -> float:
    """Deviation of the rolling line ``+-h`` from the target, in ``(-pi/2, pi/2]``."""
    if zeta > math.pi / 2:
        return zeta - math.pi
    if zeta <= -math.pi / 2:
        return zeta + math.pi
    return zeta


def _dispatch(mode, err, path_accel, gains, radius):
    if mode == "3rsr":
        return ctrl_3rsr(err, path_accel, gains, radius)
    if mode == "2rsr":
        return ctrl_2rsr(err, gains)
    return ctrl_rtsr(err, path_accel, gains, radius)


def _path_accel(vel: np.ndarray, acc: np.ndarray, mode: str) -> float:
    if mode == "norm":
        return float(np.linalg.norm(acc))
    if mode != "tangential":
        raise ValueError(f"unknown feedforward {mode!r}; expected one of {FEEDFORWARD}")
    speed = float(np.linalg.norm(vel))
    return 0.0 if speed < EPS_PROJ else float(acc @ vel) / speed


@dataclass(frozen=True)
class ControlOutput:
    tau: TorqueCommand
    error: TrackingError
    want: tuple[float, float, float]


def control_update(state: RobotState, jet: SurfaceJet, path: ReferencePath, t: float,
                   gains: ControllerGains, mode: str, params: RobotParams,
                   t_look: float = 0.2,
                   fallback: TangentBasis | None = None,
                   feedforward: str = "tangential",
                   bidirectional: bool = True, carrot: bool = True) -> ControlOutput:
    """Evaluate the mode law at time ``t`` and return the torque realising it.

    With a lookahead ``t_look > 0`` the path point at ``t + t_look`` is
    compared with the robot extrapolated over the same horizon (contact point
    ``P0 + v t_look``, heading at ``Psi + Psi' t_look``). This supplies the rate
    feedback the pursuit laws need to settle. ``t_look = 0`` compares
    ``P(t)`` with ``P0`` directly.

    ``feedforward`` selects the path acceleration handed to the mode law:
    ``"tangential"`` is the signed component along the path velocity, ``"norm"``
    the full magnitude. The full magnitude includes the centripetal part, which
    on a curved path at constant speed keeps accelerating the roll.

    With ``bidirectional`` the turning command sees the deviation wrapped to
    ``(-pi/2, pi/2]``: a target behind the robot is reached by rolling
    backwards (``cos(zeta) < 0`` in the roll law) instead of turning around.
    The rolling and tilting commands always use the full deviation.
    """
    mode = normalize_model(mode)
    target, target_vel, target_acc = path.kinematics(t + t_look)
    origin = state.p0 + t_look * state.v
    basis = body_frame(jet, state.psi + t_look * state.rates[2])
    err = tracking_error(state, target, basis, origin=origin)
    path_accel = _path_accel(target_vel, target_acc, feedforward)
    if carrot:
        d = err.e_t + t_look * target_vel
        zs = _bearing(float(d[0]), float(d[1]), float(d[2]), basis)
        err = TrackingError(err.e_t, err.zeta_dev, zs)
    if bidirectional and mode != "2rsr":
        err = TrackingError(err.e_t, err.zeta_dev, line_deviation(err.steer))
    cmd = _dispatch(mode, err, path_accel, gains, params.radius)
    # The laws turn towards positive deviation (counter-clockwise about n);
    # the turning angle of the body frame grows clockwise.
    want = (cmd[0], cmd[1], -cmd[2])
    tau = accel_to_torque(want, state, jet, params, fallback)
    return ControlOutput(tau, err, want)


def control_step(state: RobotState, jet: SurfaceJet, path: ReferencePath, t: float,
                 gains: ControllerGains, mode: str, params: RobotParams,
                 t_look: float = 0.2, fallback: TangentBasis | None = None,
                 feedforward: str = "tangential", bidirectional: bool = True,
                 carrot: bool = True) -> TorqueCommand:
    """Torque part of :func:`control_update`."""
    return control_update(state, jet, path, t, gains, mode, params, t_look, fallback,
                          feedforward, bidirectional, carrot).tau
