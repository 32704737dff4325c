"""Rolling dynamics of a thruster-driven sphere on a surface z = f(x, y).

Angle rates are ordered ``(Theta, Phi, Psi)``: rolling about the lateral axis
``l``, tilting about the heading ``h`` and turning about the normal ``n``. The
body angular velocity is ``Phi' h + Theta' l + Psi' n`` and the contact point
moves with ``R (Theta' h - Phi' l)``.

Torques are body-frame moments ``(tau_X, tau_Y, tau_Z)``; ``orientation`` maps
body vectors to world vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .frames import (
    BodyFrameBasis,
    SurfaceJet,
    TangentBasis,
    body_frame,
    surface_jet,
    tangent_basis,
    xi_cos_sin,
    xi_transform,
)
from .inertia import InertiaTensor, InvalidParameter, solid_sphere_inertia

MODELS = ("3rsr", "2rsr", "rtsr")
CONSTRAINT_TOL = 1e-12


class ConstraintViolation(ValueError):
    """A reduced model was handed a state that uses a locked rate."""


@dataclass(frozen=True)
class RobotParams:
    radius: float = 1.0
    mass: float = 0.5
    i_body: InertiaTensor | None = None
    lever_arm: float = 0.5
    gravity: float = 9.81

    def __post_init__(self):
        for name in ("radius", "mass", "lever_arm", "gravity"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParameter(f"robot.{name} must be positive, got {value}")
        if self.i_body is None:
            object.__setattr__(self, "i_body", solid_sphere_inertia(self.mass, self.radius))
        # Isotropic bodies admit scalar fast paths: (roll inertia, spin inertia)
        # about the contact point, or None.
        m = self.i_body.m
        i0 = float(m[0, 0])
        iso = i0 > 0 and bool(np.array_equal(m, i0 * np.eye(3)))
        mr2 = self.mass * self.radius * self.radius
        object.__setattr__(self, "_iso", (i0 + mr2, i0) if iso else None)


@dataclass(frozen=True)
class RobotState:
    p0: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.eye(3))
    psi: float = 0.0
    rates: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("p0", "orientation", "rates", "v"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @classmethod
    def on_surface(cls, surface, x: float, y: float, *, orientation=None, psi: float = 0.0,
                   rates=(0.0, 0.0, 0.0), params: RobotParams | None = None) -> "RobotState":
        """Build a consistent state: z from the surface, v from the rates."""
        params = params or RobotParams()
        jet = surface_jet(surface, x, y)
        rates = np.asarray(rates, dtype=float)
        a = body_frame(jet, psi).a
        v = params.radius * (rates[0] * a[:, 0] - rates[1] * a[:, 1])
        rot = np.eye(3) if orientation is None else np.asarray(orientation, dtype=float)
        return cls(np.array([x, y, jet.z]), rot, psi, rates, v)


@dataclass(frozen=True)
class TorqueCommand:
    tau: np.ndarray

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float).reshape(3)
        if not np.all(np.isfinite(tau)):
            raise ValueError("torque command has non-finite components")
        object.__setattr__(self, "tau", tau)

    def __add__(self, other: "TorqueCommand") -> "TorqueCommand":
        return TorqueCommand(self.tau + other.tau)

    def world(self, orientation: np.ndarray) -> np.ndarray:
        return orientation @ self.tau


@dataclass(frozen=True)
class CanonicalModel:
    """``x'' = a_mat @ x' + b_mat @ tau + d_vec``."""

    a_mat: np.ndarray
    b_mat: np.ndarray
    d_vec: np.ndarray
    model_kind: str

    def accel(self, v, tau) -> np.ndarray:
        return self.a_mat @ np.asarray(v, float) + self.b_mat @ np.asarray(tau, float) + self.d_vec


def _as_tau(tau) -> np.ndarray:
    return tau.tau if isinstance(tau, TorqueCommand) else np.asarray(tau, dtype=float)


def slope_angular_accel(tau_net: float, theta: float, params: RobotParams,
                        axis=(0.0, 1.0, 0.0)) -> float:
    """Rolling acceleration of the sphere on a plane inclined at ``theta``.

    ``I0`` is the body inertia about ``axis`` (body frame); positive torque and
    positive slope both drive the rolling angle negative.
    """
    u = np.asarray(axis, dtype=float)
    u = u / np.linalg.norm(u)
    i0 = float(u @ params.i_body.m @ u)
    r, m = params.radius, params.mass
    return -(tau_net + r * m * params.gravity * math.sin(theta)) / (i0 + m * r * r)


def parallel_weight(jet: SurfaceJet, params: RobotParams) -> float:
    """Weight component along the downhill direction ``p``."""
    return jet.sn * jet.grad_norm * params.mass * params.gravity


@dataclass(frozen=True)
class _Chain:
    rp: np.ndarray       # [p | e | n]
    xi: np.ndarray       # rates -> tangent-frame angular rates
    i_pen: np.ndarray    # contact inertia in {p, e, n} axes
    grav: np.ndarray     # gravity moment about the contact point, {p, e, n} axes


def _chain(orientation, psi, jet, params, fallback=None) -> _Chain:
    tb = tangent_basis(jet, fallback)
    rp = tb.matrix
    # Same tensor as contact_inertia(...) expressed in {p, e, n}; since n is the
    # third tangent axis the parallel-axis term is M R^2 diag(1, 1, 0).
    q = rp.T @ orientation
    i_pen = q @ params.i_body.m @ q.T
    mr2 = params.mass * params.radius * params.radius
    i_pen[0, 0] += mr2
    i_pen[1, 1] += mr2
    grav = np.array([0.0, parallel_weight(jet, params) * params.radius, 0.0])
    return _Chain(rp, xi_transform(jet, psi, fallback), i_pen, grav)


def _rates_accel(tau, orientation, psi, jet, params, fallback=None) -> np.ndarray:
    ch = _chain(orientation, psi, jet, params, fallback)
    tau_pen = ch.rp.T @ (orientation @ tau)
    return ch.xi.T @ np.linalg.solve(ch.i_pen, tau_pen + ch.grav)


def body_angular_accel(tau, state: RobotState, jet: SurfaceJet, params: RobotParams,
                       fallback: TangentBasis | None = None) -> np.ndarray:
    """Angle accelerations ``(Theta'', Phi'', Psi'')`` produced by ``tau``.

    The body moments are taken to world axes by the orientation and to the
    tangent frame by ``[p|e|n]^T``; Newton-Euler about the contact point with
    the gravity moment ``W_par * R`` about ``e`` gives the tangent-frame
    angular acceleration, which the xi-transform resolves onto ``l, h, n``.
    """
    return _rates_accel(_as_tau(tau), state.orientation, state.psi, jet, params, fallback)


def accel_to_torque(want, state: RobotState, jet: SurfaceJet, params: RobotParams,
                    fallback: TangentBasis | None = None) -> TorqueCommand:
    """Exact inverse of :func:`body_angular_accel`."""
    if params._iso is not None:
        i_roll, i_spin = params._iso
        cx, sx = xi_cos_sin(jet, state.psi, fallback)
        a_th, a_ph, a_ps = (float(v) for v in want)
        tp = i_roll * (-sx * a_th + cx * a_ph)
        te = i_roll * (cx * a_th + sx * a_ph) - parallel_weight(jet, params) * params.radius
        tn = i_spin * a_ps
        tb = tangent_basis(jet, fallback)
        world = tb.p_hat * tp + tb.e_hat * te + tb.n_hat * tn
        return TorqueCommand(state.orientation.T @ world)
    ch = _chain(state.orientation, state.psi, jet, params, fallback)
    tau_pen = ch.i_pen @ (ch.xi @ np.asarray(want, dtype=float)) - ch.grav
    return TorqueCommand(state.orientation.T @ (ch.rp @ tau_pen))


def kinematic_map(jet: SurfaceJet, psi: float, params: RobotParams,
                  closed_form: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Rolling map ``L`` (rates -> contact velocity) and a left inverse.

    By default the left inverse is the Moore-Penrose pseudo-inverse
    ``[h | -l]^T / R``. With ``closed_form`` the historical closed form is
    returned instead; it is singular at ``fx = 0`` and its product with ``L``
    is ``diag(1/sn, 1)``, not the identity.
    """
    a = body_frame(jet, psi).a
    r = params.radius
    lmap = r * np.column_stack((a[:, 0], -a[:, 1]))
    if not closed_form:
        return lmap, lmap.T / (r * r)
    sn, fx = jet.sn, jet.fx
    if fx == 0.0:
        raise ZeroDivisionError("closed-form pseudo-inverse is undefined at fx = 0")
    ldag = np.array([
        [a[1, 1] / sn**2, -a[0, 1] / sn**2, 0.0],
        [0.0, -a[2, 0] / (fx * sn), a[1, 0] / (fx * sn)],
    ]) / r
    return lmap, ldag


def rolling_velocity(a: np.ndarray, rates, radius: float) -> np.ndarray:
    return radius * (rates[0] * a[:, 0] - rates[1] * a[:, 1])


def _l_dot_turn(a, psi_dot, radius):
    # dh/dpsi = -l, dl/dpsi = h
    return radius * psi_dot * np.column_stack((-a[:, 1], -a[:, 0]))


def _l_dot_motion(surface, state, params, step=1e-6):
    """Rate of change of ``L`` from moving across a curved surface."""
    v = state.v
    speed = math.hypot(v[0], v[1])
    if speed == 0.0:
        return np.zeros((3, 2))
    h = step / speed
    x, y = state.p0[0], state.p0[1]
    ap = body_frame(surface_jet(surface, x + h * v[0], y + h * v[1]), state.psi).a
    am = body_frame(surface_jet(surface, x - h * v[0], y - h * v[1]), state.psi).a
    da = (ap - am) / (2.0 * h)
    return params.radius * np.column_stack((da[:, 0], -da[:, 1]))


def _torque_maps(state, jet, params, fallback):
    ch = _chain(state.orientation, state.psi, jet, params, fallback)
    inv = np.linalg.inv(ch.i_pen)
    m_tau = ch.xi.T @ inv @ ch.rp.T @ state.orientation   # tau -> rates
    m_grav = ch.xi.T @ (inv @ ch.grav)                     # gravity -> rates
    return m_tau, m_grav


def canonical_3rsr(state: RobotState, jet: SurfaceJet, params: RobotParams, tau,
                   a_mode: str = "turn", surface=None,
                   fallback: TangentBasis | None = None) -> tuple[CanonicalModel, np.ndarray]:
    """Canonical form of the three-axis rolling model and its acceleration.

    ``a_mode``:
      * ``"turn"``  -- only the turning part of ``L'``: ``-Psi' (l h^T - h l^T)``.
      * ``"verbatim"`` -- turning part of ``L'`` times the closed-form left
        inverse of :func:`kinematic_map` with ``closed_form``.
      * ``"full"`` -- adds the change of ``L`` from motion over a curved
        surface (needs ``surface``).
    """
    a = body_frame(jet, state.psi).a
    h, l_ = a[:, 0], a[:, 1]
    psi_dot = state.rates[2]
    lmap, ldag = kinematic_map(jet, state.psi, params)
    if a_mode == "turn":
        a_mat = -psi_dot * (np.outer(l_, h) - np.outer(h, l_))
    elif a_mode == "verbatim":
        _, ldag_p = kinematic_map(jet, state.psi, params, closed_form=True)
        a_mat = _l_dot_turn(a, psi_dot, params.radius) @ ldag_p
    elif a_mode == "full":
        if surface is None:
            raise ValueError("a_mode='full' needs the surface")
        ldot = _l_dot_turn(a, psi_dot, params.radius) + _l_dot_motion(surface, state, params)
        a_mat = ldot @ ldag
    else:
        raise ValueError(f"unknown a_mode {a_mode!r}")
    m_tau, m_grav = _torque_maps(state, jet, params, fallback)
    l0 = np.column_stack((lmap, np.zeros(3)))
    model = CanonicalModel(a_mat, l0 @ m_tau, l0 @ m_grav, "3rsr")
    return model, model.accel(state.v, _as_tau(tau))


def canonical_2rsr(state: RobotState, jet: SurfaceJet, params: RobotParams, tau,
                   fallback: TangentBasis | None = None) -> tuple[CanonicalModel, np.ndarray]:
    """Two-axis rolling model: turning is locked, so there is no velocity coupling."""
    if abs(state.rates[2]) > CONSTRAINT_TOL:
        raise ConstraintViolation(f"2R-SR requires Psi' = 0, got {state.rates[2]!r}")
    full, _ = canonical_3rsr(state, jet, params, tau, fallback=fallback)
    model = CanonicalModel(np.zeros((3, 3)), full.b_mat, full.d_vec, "2rsr")
    return model, model.accel(state.v, _as_tau(tau))


def canonical_rtsr(state: RobotState, jet: SurfaceJet, params: RobotParams, tau,
                   fallback: TangentBasis | None = None) -> tuple[CanonicalModel, np.ndarray]:
    """Rolling-and-turning model: tilting is locked, velocity stays along ``h``."""
    if abs(state.rates[1]) > CONSTRAINT_TOL:
        raise ConstraintViolation(f"RT-SR requires Phi' = 0, got {state.rates[1]!r}")
    a = body_frame(jet, state.psi).a
    h, l_ = a[:, 0], a[:, 1]
    a_mat = -state.rates[2] * np.outer(l_, h)
    m_tau, m_grav = _torque_maps(state, jet, params, fallback)
    col = params.radius * np.column_stack((h, np.zeros(3), np.zeros(3)))
    model = CanonicalModel(a_mat, col @ m_tau, col @ m_grav, "rtsr")
    return model, model.accel(state.v, _as_tau(tau))


CANONICAL = {"3rsr": canonical_3rsr, "2rsr": canonical_2rsr, "rtsr": canonical_rtsr}


def normalize_model(kind: str) -> str:
    key = kind.lower().replace("-", "").replace("_", "")
    if key not in MODELS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of 3rsr, 2rsr, rtsr")
    return key


def kinetic_energy(rates, jet: SurfaceJet, psi: float, orientation, params: RobotParams,
                   fallback: TangentBasis | None = None) -> float:
    if params._iso is not None:
        i_roll, i_spin = params._iso
        cx, sx = xi_cos_sin(jet, psi, fallback)
        td, pd, sd = (float(r) for r in rates)
        wp, we = -sx * td + cx * pd, cx * td + sx * pd
        return 0.5 * (i_roll * (wp * wp + we * we) + i_spin * sd * sd)
    ch = _chain(orientation, psi, jet, params, fallback)
    w = ch.xi @ np.asarray(rates, dtype=float)
    return 0.5 * float(w @ ch.i_pen @ w)


def mechanical_energy(state: RobotState, jet: SurfaceJet, params: RobotParams,
                      fallback: TangentBasis | None = None) -> float:
    """Rolling kinetic energy about the contact point plus ``M g z``."""
    ke = kinetic_energy(state.rates, jet, state.psi, state.orientation, params, fallback)
    return ke + params.mass * params.gravity * state.p0[2]


def frame_of(state: RobotState, jet: SurfaceJet) -> BodyFrameBasis:
    return body_frame(jet, state.psi)
