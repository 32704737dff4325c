"""Randomized invariant self-tests, run by ``spherebot check``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .allocation import thrusts_to_torques, torques_to_thrusts
from .dynamics import RobotParams, RobotState, accel_to_torque, body_angular_accel, kinematic_map
from .frames import (
    EulerPose,
    body_frame,
    jet_from_slopes,
    orthonormality_defect,
    rot_ypr,
    tangent_basis,
    xi_transform,
)
from .inertia import InertiaTensor
from .sim import SimConfig, run
from .terrain import Ramp


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _random_slopes(rng: np.random.Generator) -> tuple[float, float]:
    g = 10.0 ** rng.uniform(-6.0, 1.0)
    ang = rng.uniform(-math.pi, math.pi)
    return g * math.cos(ang), g * math.sin(ang)


def check_rotations(rng, n: int) -> CheckResult:
    worst_o, worst_d = 0.0, 0.0
    for a, b, g in rng.uniform(-math.pi, math.pi, size=(n, 3)):
        r = rot_ypr(EulerPose(a, b, g))
        worst_o = max(worst_o, orthonormality_defect(r))
        worst_d = max(worst_d, abs(np.linalg.det(r) - 1.0))
    return CheckResult("rotation orthonormality", worst_o < 1e-12 and worst_d < 1e-9,
                       f"max defect {worst_o:.2e}, max |det-1| {worst_d:.2e}")


def check_frames(rng, n: int) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        fx, fy = _random_slopes(rng)
        jet = jet_from_slopes(fx, fy)
        a = body_frame(jet, rng.uniform(-10.0, 10.0)).a
        tb = tangent_basis(jet)
        worst = max(worst,
                    orthonormality_defect(a),
                    abs(np.linalg.det(a) - 1.0),
                    float(np.abs(a[:, 2] - tb.n_hat).max()),
                    float(np.abs(np.cross(tb.e_hat, tb.n_hat) - tb.p_hat).max()),
                    orthonormality_defect(tb.matrix))
    return CheckResult("surface frames", worst < 1e-9, f"worst deviation {worst:.2e}")


def check_xi_and_pseudo_inverse(rng, n: int) -> CheckResult:
    params = RobotParams(radius=float(rng.uniform(0.2, 3.0)))
    worst_xi, worst_l = 0.0, 0.0
    for _ in range(n):
        fx, fy = _random_slopes(rng)
        jet = jet_from_slopes(fx, fy)
        psi = rng.uniform(-10.0, 10.0)
        u = rng.normal(size=3)
        w = xi_transform(jet, psi) @ u
        worst_xi = max(worst_xi, abs(np.linalg.norm(w) - np.linalg.norm(u)))
        lmap, ldag = kinematic_map(jet, psi, params)
        worst_l = max(worst_l, float(np.abs(ldag @ lmap - np.eye(2)).max()))
    ok = worst_xi < 1e-12 and worst_l < 1e-12
    return CheckResult("xi isometry and L+L = I", ok,
                       f"xi norm error {worst_xi:.2e}, L+L error {worst_l:.2e}")


def _random_state(rng, params) -> tuple[RobotState, object]:
    fx, fy = _random_slopes(rng)
    jet = jet_from_slopes(fx, fy)
    orient = rot_ypr(EulerPose(*rng.uniform(-math.pi, math.pi, size=3)))
    state = RobotState(np.zeros(3), orient, float(rng.uniform(-math.pi, math.pi)),
                       rng.normal(size=3))
    return state, jet


def check_torque_round_trip(rng, n: int) -> CheckResult:
    rel = 0.0
    for k in range(n):
        if k % 2:
            diag = rng.uniform(0.1, 1.0, size=3)
            q = rot_ypr(EulerPose(*rng.uniform(-math.pi, math.pi, size=3)))
            m = q @ np.diag(diag) @ q.T
            params = RobotParams(mass=1.0, i_body=InertiaTensor(0.5 * (m + m.T)))
        else:
            params = RobotParams()
        state, jet = _random_state(rng, params)
        want = rng.normal(size=3) * 5.0
        tau = accel_to_torque(want, state, jet, params)
        back = body_angular_accel(tau, state, jet, params)
        rel = max(rel, float(np.abs(back - want).max()) / max(1.0, float(np.abs(want).max())))
    return CheckResult("accel/torque round trip", rel < 1e-9, f"max error {rel:.2e}")


def check_allocation(rng, n: int) -> CheckResult:
    worst = 0.0
    for _ in range(n):
        lever = float(rng.uniform(0.05, 2.0))
        tau = rng.normal(size=3) * 10.0
        back = thrusts_to_torques(torques_to_thrusts(tau, lever), lever).tau
        worst = max(worst, float(np.abs(back - tau).max() / max(1.0, np.abs(tau).max())))
    return CheckResult("allocation round trip", worst < 1e-14, f"max error {worst:.2e}")


def check_free_roll(rng, n: int) -> CheckResult:
    slope = math.pi / 8
    config = SimConfig(dt=1e-3, t_end=1.0, terrain=Ramp(slope))
    trace = run(config)
    speed = float(np.linalg.norm(trace.final_state.v))
    expected = 5.0 / 7.0 * config.params.gravity * math.sin(slope)
    rel = abs(speed - expected) / expected
    return CheckResult("free roll on ramp", trace.error is None and rel < 1e-6,
                       f"speed {speed:.9f} vs {expected:.9f} (rel {rel:.1e})")


def check_energy_and_determinism(rng, n: int) -> CheckResult:
    rates = tuple(float(v) for v in rng.uniform(-2.0, 2.0, size=3))
    config = SimConfig(dt=1e-3, t_end=2.0, terrain=Ramp(math.radians(10.0)),
                       initial_rates=rates)
    t1, t2 = run(config), run(config)
    energy = t1.column("energy")
    scale = max(abs(energy[0]), config.params.mass * config.params.gravity * config.params.radius)
    drift = float(np.abs(energy - energy[0]).max()) / scale
    same = np.array_equal(t1.array(), t2.array(), equal_nan=True)
    ok = t1.error is None and drift < 1e-4 and same and t1.max_surface_defect < 1e-6
    return CheckResult("energy, constraint and determinism", ok,
                       f"energy drift {drift:.1e}, surface defect {t1.max_surface_defect:.1e}, "
                       f"bit-identical {same}")


CHECKS: tuple[tuple[Callable[[np.random.Generator, int], CheckResult], int], ...] = (
    (check_rotations, 10_000),
    (check_frames, 10_000),
    (check_xi_and_pseudo_inverse, 10_000),
    (check_torque_round_trip, 1_000),
    (check_allocation, 1_000),
    (check_free_roll, 1),
    (check_energy_and_determinism, 1),
)


def run_checks(seed: int = 0) -> list[CheckResult]:
    """Run every check with its own generator spawned from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(len(CHECKS))
    results = []
    for (fn, n), child in zip(CHECKS, children):
        try:
            results.append(fn(np.random.default_rng(child), n))
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            results.append(CheckResult(fn.__name__, False, f"raised {exc!r}"))
    return results
