"""Fixed-step closed-loop simulation.

The integrated state is ``(x, y, Theta', Phi', Psi', Psi)`` plus the body
orientation. The contact point moves with the rolling map ``L``, which is the
canonical form of the dynamics with the complete ``L'``; the height is slaved
to the surface. Orientation is advanced on the rotation group with the
exponential map, outside the Runge-Kutta vector.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, TextIO

import numpy as np

from . import terrain as terrain_mod
from .control import (
    FEEDFORWARD,
    ControllerGains,
    ReferencePath,
    circle,
    control_update,
    straight_line,
    waypoints,
)
from .dynamics import RobotParams, RobotState, TorqueCommand, mechanical_energy, normalize_model
from .frames import (
    EPS_GRAD,
    ORTHO_TOL,
    EulerPose,
    TangentBasis,
    body_frame,
    euler_from_matrix,
    exp_so3,
    _flat_heading,
    orthonormality_defect,
    reorthonormalize,
    rot_ypr,
    surface_jet,
    tangent_basis,
)
from .terrain import CosineTerrain, DomainError, Ramp, TerrainSurface

TRACE_COLUMNS = (
    "t", "x", "y", "z", "alpha", "beta", "gamma", "psi",
    "theta_dot", "phi_dot", "psi_dot", "tau_X", "tau_Y", "tau_Z",
    "e_norm", "zeta_dev", "energy",
)


class DomainExitError(RuntimeError):
    """The robot left the terrain domain; ``state`` is the last valid state."""

    def __init__(self, message: str, state: RobotState, t: float):
        super().__init__(message)
        self.state = state
        self.t = t


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_end: float = 10.0
    model_kind: str = "3rsr"
    terrain: TerrainSurface = field(default_factory=terrain_mod.flat)
    initial_pose: EulerPose = field(default_factory=EulerPose)
    initial_xy: tuple[float, float] = (0.0, 0.0)
    initial_psi: float = 0.0
    initial_rates: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gains: ControllerGains = field(default_factory=ControllerGains)
    params: RobotParams = field(default_factory=RobotParams)
    path: dict | None = None                 # reference description, None = open loop
    torque: tuple[float, float, float] = (0.0, 0.0, 0.0)   # open-loop body torque
    torque_schedule: Callable[[float], object] | None = None
    t_look: float = 0.2
    feedforward: str = "tangential"
    bidirectional: bool = True
    carrot: bool = True
    control_every: int = 1                   # controller hold, in steps

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"sim.dt must be positive, got {self.dt}")
        if not (self.t_end >= self.dt):
            raise ValueError(f"sim.t_end must be at least dt, got {self.t_end}")
        if self.t_look < 0:
            raise ValueError(f"sim.t_look must be non-negative, got {self.t_look}")
        if int(self.control_every) < 1:
            raise ValueError("sim.control_every must be >= 1")
        try:
            object.__setattr__(self, "model_kind", normalize_model(self.model_kind))
        except ValueError as exc:
            raise ValueError(f"sim.model: {exc}") from None
        if self.feedforward not in FEEDFORWARD:
            raise ValueError(f"sim.feedforward must be one of {FEEDFORWARD}, got {self.feedforward!r}")
        x, y = self.initial_xy
        if not self.terrain.contains(x, y):
            raise ValueError(f"initial.x,y ({x}, {y}) is outside the terrain")
        rates = tuple(float(r) for r in self.initial_rates)
        if self.model_kind == "2rsr" and rates[2] != 0.0:
            raise ValueError("initial.rates: 2R-SR runs need a zero turning rate")
        if self.model_kind == "rtsr" and rates[1] != 0.0:
            raise ValueError("initial.rates: RT-SR runs need a zero tilting rate")

    @property
    def n_steps(self) -> int:
        ratio = self.t_end / self.dt
        nearest = round(ratio)
        return int(nearest) if abs(ratio - nearest) <= 1e-9 * max(1.0, ratio) else math.floor(ratio)

    def reference(self) -> ReferencePath | None:
        return None if self.path is None else build_path(self.terrain, self.path)

    def initial_state(self) -> RobotState:
        x, y = self.initial_xy
        return RobotState.on_surface(self.terrain, x, y, orientation=rot_ypr(self.initial_pose),
                                     psi=self.initial_psi, rates=self.initial_rates,
                                     params=self.params)


def build_path(surface: TerrainSurface, spec: dict) -> ReferencePath:
    spec = dict(spec)
    kind = spec.pop("kind", None)
    builders = {
        "line": (straight_line, {"start", "heading", "speed", "duration"}),
        "circle": (circle, {"center", "radius", "period", "duration"}),
        "waypoints": (waypoints, {"times", "points"}),
    }
    if kind not in builders:
        raise KeyError(f"path.kind={kind!r}")
    fn, allowed = builders[kind]
    for key in spec:
        if key not in allowed:
            raise KeyError(f"path.{key}")
    return fn(surface, **spec)


@dataclass
class SimTrace:
    rows: list[tuple[float, ...]] = field(default_factory=list)
    world_torque: list[np.ndarray] = field(default_factory=list)
    max_surface_defect: float = 0.0
    max_ortho_defect: float = 0.0
    error: str | None = None
    final_state: RobotState | None = None

    def array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(-1, len(TRACE_COLUMNS))

    def column(self, name: str) -> np.ndarray:
        return self.array()[:, TRACE_COLUMNS.index(name)]

    def world_torques(self) -> np.ndarray:
        return np.array(self.world_torque, dtype=float).reshape(-1, 3)

    def write_csv(self, out: TextIO | str) -> None:
        """Header plus one row per sample; floats in shortest round-trip form."""
        if isinstance(out, str):
            with open(out, "w", newline="") as fh:
                self.write_csv(fh)
            return
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for row in self.rows:
            writer.writerow([repr(float(v)) for v in row])

    @staticmethod
    def read_csv(path: str) -> np.ndarray:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != TRACE_COLUMNS:
                raise ValueError("unexpected trace header")
            return np.array([[float(v) for v in row] for row in reader], dtype=float)


# ----------------------------------------------------------------------------
# Dynamics right-hand side
# ----------------------------------------------------------------------------

class _Rhs:
    """Time derivative of the integrated vector for fixed torque and model.

    Written with scalar arithmetic: this is the inner loop of every run and
    3-vector numpy calls cost more than the arithmetic they wrap.
    """

    def __init__(self, config: SimConfig):
        self.surface = config.terrain
        p = config.params
        self.r = p.radius
        ib = p.i_body.m
        self.ib = ib
        self.mr2 = p.mass * p.radius * p.radius
        self.mg = p.mass * p.gravity
        self.kind = config.model_kind
        i0 = float(ib[0, 0])
        self.isotropic = bool(i0 > 0 and np.array_equal(ib, i0 * np.eye(3)))
        self.inv_roll = 1.0 / (i0 + self.mr2) if self.isotropic else 0.0
        self.inv_spin = 1.0 / i0 if self.isotropic else 0.0

    def __call__(self, y, rot: np.ndarray, tau_world, fallback: TangentBasis | None):
        """Return ``(dy, omega_world)`` as tuples."""
        px, py, td, pd, sd, psi = y
        _, fx, fy = self.surface.evaluate(px, py)
        g2 = fx * fx + fy * fy
        sn = 1.0 / math.sqrt(1.0 + g2)
        k = sn * sn / (1.0 + sn)
        axx, ayy, axy = 1.0 - k * fx * fx, 1.0 - k * fy * fy, k * fx * fy
        c, s = math.cos(psi), math.sin(psi)
        h0, h1, h2 = axx * c + axy * s, -axy * c - ayy * s, sn * (fx * c - fy * s)
        l0, l1, l2 = axx * s - axy * c, -axy * s + ayy * c, sn * (fx * s + fy * c)
        n0, n1, n2 = -sn * fx, -sn * fy, sn
        if g2 >= EPS_GRAD * EPS_GRAD:
            gi = 1.0 / math.sqrt(g2)
            e0, e1, e2 = gi * fy, -gi * fx, 0.0
            p0, p1, p2 = -gi * sn * fx, -gi * sn * fy, -gi * sn * g2
            w_par = self.mg * sn * g2 * gi
        else:
            p0, p1 = _flat_heading(fallback)
            e0, e1, e2 = -n2 * p1, n2 * p0, n0 * p1 - n1 * p0
            en = 1.0 / math.sqrt(e0 * e0 + e1 * e1 + e2 * e2)
            e0, e1, e2 = e0 * en, e1 * en, e2 * en
            p0, p1, p2 = e1 * n2 - e2 * n1, e2 * n0 - e0 * n2, e0 * n1 - e1 * n0
            w_par = self.mg * sn * math.sqrt(g2)
        cx = l0 * e0 + l1 * e1 + l2 * e2
        sx = h0 * e0 + h1 * e1 + h2 * e2
        t0, t1, t2 = tau_world
        tp = p0 * t0 + p1 * t1 + p2 * t2
        te = e0 * t0 + e1 * t1 + e2 * t2 + w_par * self.r
        tn = n0 * t0 + n1 * t1 + n2 * t2
        if self.isotropic:
            wp, we, wn = tp * self.inv_roll, te * self.inv_roll, tn * self.inv_spin
        else:
            rp = np.array([[p0, e0, n0], [p1, e1, n1], [p2, e2, n2]])
            q = rp.T @ rot
            i_pen = q @ self.ib @ q.T
            i_pen[0, 0] += self.mr2
            i_pen[1, 1] += self.mr2
            wp, we, wn = np.linalg.solve(i_pen, np.array([tp, te, tn])).tolist()
        acc_theta = -sx * wp + cx * we
        acc_phi = cx * wp + sx * we
        acc_psi = wn
        if self.kind == "2rsr":
            acc_psi = 0.0
        elif self.kind == "rtsr":
            acc_phi = 0.0
        r = self.r
        dy = (r * (td * h0 - pd * l0), r * (td * h1 - pd * l1), acc_theta, acc_phi, acc_psi, sd)
        omega = (pd * h0 + td * l0 + sd * n0, pd * h1 + td * l1 + sd * n1,
                 pd * h2 + td * l2 + sd * n2)
        return dy, omega


def propagate_orientation(orientation: np.ndarray, omega_world, dt: float) -> np.ndarray:
    """Rotate by ``exp(dt * omega)`` applied on the left (world-frame rate)."""
    return exp_so3(np.asarray(omega_world, dtype=float) * dt) @ orientation


def _state_from(y: np.ndarray, rot: np.ndarray, surface: TerrainSurface, radius: float) -> RobotState:
    jet = surface_jet(surface, y[0], y[1])
    a = body_frame(jet, y[5]).a
    rates = np.array(y[2:5])
    v = radius * (rates[0] * a[:, 0] - rates[1] * a[:, 1])
    return RobotState(np.array([y[0], y[1], jet.z]), rot, float(y[5]), rates, v)


def _vector_of(state: RobotState) -> np.ndarray:
    return np.array([state.p0[0], state.p0[1], *state.rates, state.psi], dtype=float)


def _axpy(y, a, k):
    return tuple(yi + a * ki for yi, ki in zip(y, k))


def _exp_times(rot, w, dt):
    """``exp(dt [w]_x) @ rot`` on row-major 9-tuples."""
    wx, wy, wz = w[0] * dt, w[1] * dt, w[2] * dt
    t2 = wx * wx + wy * wy + wz * wz
    if t2 < 1e-16:
        a, b = 1.0, 0.5
    else:
        theta = math.sqrt(t2)
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / t2
    e00, e01, e02 = 1.0 - b * (wy * wy + wz * wz), b * wx * wy - a * wz, b * wx * wz + a * wy
    e10, e11, e12 = b * wx * wy + a * wz, 1.0 - b * (wx * wx + wz * wz), b * wy * wz - a * wx
    e20, e21, e22 = b * wx * wz - a * wy, b * wy * wz + a * wx, 1.0 - b * (wx * wx + wy * wy)
    r00, r01, r02, r10, r11, r12, r20, r21, r22 = rot
    return (e00 * r00 + e01 * r10 + e02 * r20, e00 * r01 + e01 * r11 + e02 * r21,
            e00 * r02 + e01 * r12 + e02 * r22,
            e10 * r00 + e11 * r10 + e12 * r20, e10 * r01 + e11 * r11 + e12 * r21,
            e10 * r02 + e11 * r12 + e12 * r22,
            e20 * r00 + e21 * r10 + e22 * r20, e20 * r01 + e21 * r11 + e22 * r21,
            e20 * r02 + e21 * r12 + e22 * r22)


def _rk4(rhs: _Rhs, y0, rot0: np.ndarray, tau_world, dt: float,
         fallback: TangentBasis | None):
    """One RK4 step; stage orientations are ``exp(c dt w_prev) @ rot0``."""
    tau_world = tuple(float(t) for t in tau_world)
    y0 = tuple(float(v) for v in y0)
    r0 = tuple(rot0.ravel().tolist())
    as_mat = (lambda r: np.array(r).reshape(3, 3)) if not rhs.isotropic else (lambda r: None)
    half = 0.5 * dt
    k1, w1 = rhs(y0, rot0, tau_world, fallback)
    k2, w2 = rhs(_axpy(y0, half, k1), as_mat(_exp_times(r0, w1, half)), tau_world, fallback)
    k3, w3 = rhs(_axpy(y0, half, k2), as_mat(_exp_times(r0, w2, half)), tau_world, fallback)
    k4, w4 = rhs(_axpy(y0, dt, k3), as_mat(_exp_times(r0, w3, dt)), tau_world, fallback)
    sixth = dt / 6.0
    y1 = np.array([y + sixth * (a + 2.0 * b + 2.0 * c + d)
                   for y, a, b, c, d in zip(y0, k1, k2, k3, k4)])
    w = [(a + 2.0 * b + 2.0 * c + d) / 6.0 for a, b, c, d in zip(w1, w2, w3, w4)]
    return y1, np.array(_exp_times(r0, w, dt)).reshape(3, 3)


def _advance(state: RobotState, tau, config: SimConfig, fallback, rhs: _Rhs):
    """Step and return ``(new_state, orthonormality defect of its orientation)``."""
    tau_world = state.orientation @ (tau.tau if isinstance(tau, TorqueCommand) else np.asarray(tau, float))
    y1, rot1 = _rk4(rhs, _vector_of(state), state.orientation, tau_world, config.dt, fallback)
    if not (np.all(np.isfinite(y1)) and config.terrain.contains(y1[0], y1[1])):
        raise DomainExitError(f"robot left the terrain domain at ({y1[0]}, {y1[1]})", state, math.nan)
    defect = orthonormality_defect(rot1)
    if defect > ORTHO_TOL:
        rot1 = reorthonormalize(rot1)
        defect = orthonormality_defect(rot1)
    return _state_from(y1, rot1, config.terrain, config.params.radius), defect


def step(state: RobotState, tau: TorqueCommand, config: SimConfig,
         fallback: TangentBasis | None = None) -> RobotState:
    """One Runge-Kutta step of the coupled rolling and attitude equations.

    The body torque is taken to world axes with the orientation at the start
    of the step and held fixed in world axes over the step.
    """
    return _advance(state, tau, config, fallback, _Rhs(config))[0]


def run(config: SimConfig) -> SimTrace:
    """Integrate ``config`` and record one trace row per step boundary.

    On a domain exit the partial trace is returned with ``error`` set.
    """
    rhs = _Rhs(config)
    path = config.reference()
    params = config.params
    trace = SimTrace()
    state = config.initial_state()
    fallback = tangent_basis(surface_jet(config.terrain, *config.initial_xy))
    n = config.n_steps
    tau = np.zeros(3)
    zeta = 0.0
    defect = orthonormality_defect(state.orientation)
    for k in range(n + 1):
        t = k * config.dt
        jet = surface_jet(config.terrain, state.p0[0], state.p0[1])
        fallback = tangent_basis(jet, fallback)
        if k % config.control_every == 0 or k == n:
            if path is not None:
                out = control_update(state, jet, path, t, config.gains, config.model_kind,
                                     params, config.t_look, fallback, config.feedforward,
                                     config.bidirectional, config.carrot)
                tau, zeta = out.tau.tau, out.error.zeta_dev
            elif config.torque_schedule is not None:
                cmd = config.torque_schedule(t)
                tau = cmd.tau if isinstance(cmd, TorqueCommand) else np.asarray(cmd, dtype=float)
            else:
                tau = np.asarray(config.torque, dtype=float)
        e_norm = math.nan if path is None else float(np.linalg.norm(path.point(t) - state.p0))
        pose = euler_from_matrix(state.orientation)
        energy = mechanical_energy(state, jet, params, fallback)
        trace.rows.append((t, *state.p0, pose.alpha, pose.beta, pose.gamma, state.psi,
                           *state.rates, *tau, e_norm, zeta, energy))
        trace.world_torque.append(state.orientation @ tau)
        trace.max_surface_defect = max(trace.max_surface_defect,
                                       abs(state.p0[2] - config.terrain.height(state.p0[0], state.p0[1])))
        trace.max_ortho_defect = max(trace.max_ortho_defect, defect)
        trace.final_state = state
        if k == n:
            break
        try:
            state, defect = _advance(state, tau, config, fallback, rhs)
        except DomainExitError as exc:
            trace.error = f"domain exit after t = {t}: {exc}"
            exc.t = t
            break
        except (ValueError, np.linalg.LinAlgError) as exc:
            trace.error = f"simulation failed after t = {t}: {exc}"
            break
    return trace


# ----------------------------------------------------------------------------
# Scenarios
# ----------------------------------------------------------------------------

RAMP_SLOPE = math.pi / 8
RAMP_SPEED = 0.5
RAMP_POSES = (
    EulerPose(0.0, 0.0, 0.0),
    EulerPose(math.pi / 3, math.pi / 3, math.pi / 3),
    EulerPose(math.pi / 2, math.pi / 3, math.pi / 6),
)


def scenario_ramp(initial_pose: EulerPose = EulerPose(), **overrides) -> SimConfig:
    """Climb a straight line up a ramp of slope pi/8 rising along +x."""
    base = SimConfig(
        dt=1e-3, t_end=30.0, model_kind="3rsr",
        terrain=Ramp(slope=RAMP_SLOPE, heading=0.0),
        initial_pose=initial_pose,
        params=RobotParams(radius=1.0, mass=0.5),
        path={"kind": "line", "start": [0.0, 0.0], "heading": 0.0, "speed": RAMP_SPEED},
    )
    return replace(base, **overrides)


def scenario_circle(**overrides) -> SimConfig:
    """Track ``(5 + sin(2 pi t / 10), 5 + cos(2 pi t / 10))`` on the cosine terrain."""
    base = SimConfig(
        dt=1e-3, t_end=60.0, model_kind="3rsr",
        terrain=CosineTerrain(amplitude=0.5, period=8.0),
        initial_xy=(5.0, 6.0),
        params=RobotParams(radius=1.0, mass=0.5),
        path={"kind": "circle", "center": [5.0, 5.0], "radius": 1.0, "period": 10.0},
    )
    return replace(base, **overrides)


__all__ = [
    "TRACE_COLUMNS", "DomainError", "DomainExitError", "SimConfig", "SimTrace",
    "build_path", "propagate_orientation", "step", "run", "scenario_ramp",
    "scenario_circle", "RAMP_POSES",
]
