"""Rotation matrices and surface-attached frames.

Conventions
-----------
* ``rot_ypr`` is the Z-Y-X (yaw, pitch, roll) rotation taking body-frame
  vectors to the world frame.
* The tangent frame ``{p, e, n}`` is right-handed: ``p = e x n``. ``p`` points
  down the steepest descent line, ``e`` is horizontal.
* The robot frame ``{h, l, n}`` is the columns of ``a``. It is the minimal
  tilt taking ``z`` onto ``n`` composed with a turn of ``-psi`` about ``z``, so
  increasing ``psi`` swings the heading ``h`` towards ``-l`` (clockwise seen
  from above the surface).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .terrain import TerrainSurface

EPS_GRAD = 1e-9
ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class EulerPose:
    alpha: float = 0.0  # yaw
    beta: float = 0.0   # pitch
    gamma: float = 0.0  # roll

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)


@dataclass(frozen=True)
class SurfaceJet:
    z: float
    fx: float
    fy: float
    s: float | None
    sn: float

    @property
    def grad_norm(self) -> float:
        return math.hypot(self.fx, self.fy)

    @property
    def is_flat(self) -> bool:
        return self.s is None


@dataclass(frozen=True)
class TangentBasis:
    p_hat: np.ndarray
    e_hat: np.ndarray
    n_hat: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        """``[p | e | n]``: tangent-frame coordinates to world."""
        return np.column_stack((self.p_hat, self.e_hat, self.n_hat))


@dataclass(frozen=True)
class BodyFrameBasis:
    a: np.ndarray

    @property
    def h_hat(self) -> np.ndarray:
        return self.a[:, 0]

    @property
    def l_hat(self) -> np.ndarray:
        return self.a[:, 1]

    @property
    def n_hat(self) -> np.ndarray:
        return self.a[:, 2]


def rot_ypr(pose: EulerPose) -> np.ndarray:
    ca, sa = math.cos(pose.alpha), math.sin(pose.alpha)
    cb, sb = math.cos(pose.beta), math.sin(pose.beta)
    cg, sg = math.cos(pose.gamma), math.sin(pose.gamma)
    return np.array([
        [ca * cb, ca * sb * sg - sa * cg, ca * sb * cg + sa * sg],
        [sa * cb, sa * sb * sg + ca * cg, sa * sb * cg - ca * sg],
        [-sb, cb * sg, cb * cg],
    ])


def euler_from_matrix(rot: np.ndarray) -> EulerPose:
    """Inverse of :func:`rot_ypr`.

    At gimbal lock (|beta| = pi/2) roll is set to zero and the residual
    rotation is folded into yaw.
    """
    r31 = min(1.0, max(-1.0, float(rot[2, 0])))
    cb = math.hypot(rot[0, 0], rot[1, 0])
    beta = math.atan2(-r31, cb)
    if cb < 1e-12:
        alpha = math.atan2(-rot[0, 1], rot[1, 1])
        gamma = 0.0
    else:
        alpha = math.atan2(rot[1, 0], rot[0, 0])
        gamma = math.atan2(rot[2, 1], rot[2, 2])
    return EulerPose(_wrap(alpha), beta, _wrap(gamma))


def _wrap(angle: float) -> float:
    """Map to (-pi, pi]."""
    out = math.remainder(angle, 2.0 * math.pi)
    return math.pi if out == -math.pi else out


def surface_jet(surface: TerrainSurface, x: float, y: float) -> SurfaceJet:
    z, fx, fy = surface.evaluate(x, y)
    g2 = fx * fx + fy * fy
    sn = 1.0 / math.sqrt(1.0 + g2)
    s = None if g2 < EPS_GRAD * EPS_GRAD else 1.0 / math.sqrt(g2)
    return SurfaceJet(z, fx, fy, s, sn)


def jet_from_slopes(fx: float, fy: float, z: float = 0.0) -> SurfaceJet:
    """Jet for given slopes, bypassing a surface object."""
    g2 = fx * fx + fy * fy
    s = None if g2 < EPS_GRAD * EPS_GRAD else 1.0 / math.sqrt(g2)
    return SurfaceJet(z, fx, fy, s, 1.0 / math.sqrt(1.0 + g2))


def tangent_basis(jet: SurfaceJet, fallback: TangentBasis | None = None) -> TangentBasis:
    """Tangent frame ``{p, e, n}`` at a surface point.

    At a flat point the heading is undefined; ``fallback.p_hat`` (typically the
    last valid frame) is projected onto the horizontal plane, else +x is used.
    ``e`` then follows as ``n x p`` to keep the frame right-handed.
    """
    fx, fy, sn = jet.fx, jet.fy, jet.sn
    n = np.array([-sn * fx, -sn * fy, sn])
    if jet.s is not None:
        s = jet.s
        e = np.array([s * fy, -s * fx, 0.0])
        g2 = fx * fx + fy * fy
        p = np.array([-s * sn * fx, -s * sn * fy, -s * sn * g2])
        return TangentBasis(p, e, n)
    p0, p1 = _flat_heading(fallback)
    # e = n x p_horizontal, then p = e x n so the triad is exactly orthonormal
    n0, n1, n2 = float(n[0]), float(n[1]), float(n[2])
    e0, e1, e2 = -n2 * p1, n2 * p0, n0 * p1 - n1 * p0
    k = 1.0 / math.sqrt(e0 * e0 + e1 * e1 + e2 * e2)
    e0, e1, e2 = e0 * k, e1 * k, e2 * k
    p = np.array([e1 * n2 - e2 * n1, e2 * n0 - e0 * n2, e0 * n1 - e1 * n0])
    return TangentBasis(p, np.array([e0, e1, e2]), n)


def _flat_heading(fallback: TangentBasis | None) -> tuple[float, float]:
    """Horizontal unit heading used where the slope direction is undefined."""
    if fallback is not None:
        q0, q1 = float(fallback.p_hat[0]), float(fallback.p_hat[1])
        qn = math.hypot(q0, q1)
        if qn > 1e-6:
            return q0 / qn, q1 / qn
    return 1.0, 0.0


def _tilt_terms(fx: float, fy: float, sn: float) -> tuple[float, float, float]:
    # s^2 (1 - sn) == sn^2 / (1 + sn): finite at flat points, no cancellation.
    k = sn * sn / (1.0 + sn)
    return 1.0 - k * fx * fx, 1.0 - k * fy * fy, k * fx * fy


def body_frame(jet: SurfaceJet, psi: float) -> BodyFrameBasis:
    """Matrix ``a`` whose columns are ``h, l, n`` in world coordinates."""
    fx, fy, sn = jet.fx, jet.fy, jet.sn
    axx, ayy, axy = _tilt_terms(fx, fy, sn)
    c, s = math.cos(psi), math.sin(psi)
    a = np.array([
        [axx * c + axy * s, axx * s - axy * c, -sn * fx],
        [-axy * c - ayy * s, -axy * s + ayy * c, -sn * fy],
        [sn * fx * c - sn * fy * s, sn * fx * s + sn * fy * c, sn],
    ])
    return BodyFrameBasis(a)


def xi_cos_sin(jet: SurfaceJet, psi: float,
               fallback: TangentBasis | None = None) -> tuple[float, float]:
    """``(cos xi, sin xi)`` = ``(l.e, h.e)`` between the robot and tangent frames."""
    c, s = math.cos(psi), math.sin(psi)
    if jet.s is not None:
        sfx, sfy = jet.s * jet.fx, jet.s * jet.fy
        return sfy * s - sfx * c, sfx * s + sfy * c
    # Flat point: use the conventional e of tangent_basis (horizontal, unit).
    e = tangent_basis(jet, fallback).e_hat
    h = (c, -s)
    l_ = (s, c)
    return l_[0] * e[0] + l_[1] * e[1], h[0] * e[0] + h[1] * e[1]


def xi_transform(jet: SurfaceJet, psi: float,
                 fallback: TangentBasis | None = None) -> np.ndarray:
    """Map ``[Theta, Phi, Psi]`` rates to tangent-frame ``[p, e, n]`` rates.

    The upper-left block is a reflection, so the matrix is orthogonal with
    determinant -1.
    """
    cx, sx = xi_cos_sin(jet, psi, fallback)
    return np.array([
        [-sx, cx, 0.0],
        [cx, sx, 0.0],
        [0.0, 0.0, 1.0],
    ])


def exp_so3(omega) -> np.ndarray:
    """Rodrigues formula for ``exp([omega]_x)``."""
    wx, wy, wz = float(omega[0]), float(omega[1]), float(omega[2])
    t2 = wx * wx + wy * wy + wz * wz
    if t2 < 1e-16:
        # Taylor terms keep the result orthonormal to machine precision here.
        a, b = 1.0, 0.5
    else:
        theta = math.sqrt(t2)
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / t2
    # I + a K + b K^2 with K = [omega]_x and K^2 = w w^T - |w|^2 I
    return np.array([
        [1.0 - b * (wy * wy + wz * wz), b * wx * wy - a * wz, b * wx * wz + a * wy],
        [b * wx * wy + a * wz, 1.0 - b * (wx * wx + wz * wz), b * wy * wz - a * wx],
        [b * wx * wz - a * wy, b * wy * wz + a * wx, 1.0 - b * (wx * wx + wy * wy)],
    ])


_EYE3 = np.eye(3)


def orthonormality_defect(rot: np.ndarray) -> float:
    """Largest entry of ``|R^T R - I|``."""
    return float(np.abs(rot.T @ rot - _EYE3).max())


def reorthonormalize(rot: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (polar decomposition via SVD)."""
    u, _, vt = np.linalg.svd(rot)
    out = u @ vt
    if np.linalg.det(out) < 0:
        u[:, -1] *= -1
        out = u @ vt
    return out
