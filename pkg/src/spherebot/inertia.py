"""Inertia tensors: homogeneous sphere, parallel-axis shift, contact-point total."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InvalidParameter(ValueError):
    pass


@dataclass(frozen=True)
class InertiaTensor:
    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (3, 3):
            raise InvalidParameter(f"inertia tensor must be 3x3, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidParameter("inertia tensor has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.T)) > 1e-12 * scale:
            raise InvalidParameter("inertia tensor must be symmetric")
        if np.min(np.linalg.eigvalsh(m)) < -1e-12 * scale:
            raise InvalidParameter("inertia tensor must be positive semi-definite")
        object.__setattr__(self, "m", m)

    @classmethod
    def diagonal(cls, ixx: float, iyy: float, izz: float) -> "InertiaTensor":
        return cls(np.diag([ixx, iyy, izz]))

    def satisfies_triangle(self, tol: float = 1e-12) -> bool:
        d = np.diag(self.m)
        return bool(d[0] <= d[1] + d[2] + tol and d[1] <= d[0] + d[2] + tol
                    and d[2] <= d[0] + d[1] + tol)

    def rotated(self, rot: np.ndarray) -> "InertiaTensor":
        """Express in another frame: ``rot @ I @ rot.T``."""
        m = rot @ self.m @ rot.T
        return InertiaTensor(0.5 * (m + m.T))


def solid_sphere_inertia(mass: float, radius: float) -> InertiaTensor:
    if not mass > 0:
        raise InvalidParameter(f"mass must be positive, got {mass}")
    if not radius > 0:
        raise InvalidParameter(f"radius must be positive, got {radius}")
    return InertiaTensor(0.4 * mass * radius * radius * np.eye(3))


def point_mass_inertia(mass: float, offset) -> np.ndarray:
    """Inertia of a point mass at ``offset`` about the origin."""
    d = np.asarray(offset, dtype=float)
    return mass * (float(d @ d) * np.eye(3) - np.outer(d, d))


def parallel_axis(i_cm: InertiaTensor, mass: float, offset) -> InertiaTensor:
    """Shift a centre-of-mass tensor to a parallel frame displaced by ``offset``."""
    return InertiaTensor(i_cm.m + point_mass_inertia(mass, offset))


def contact_inertia(params, n_hat, orientation: np.ndarray | None = None) -> InertiaTensor:
    """Total inertia about the contact point, world axes.

    ``params.i_body`` is the tensor about the centre of mass in body axes; when
    ``orientation`` (world <- body) is given it is rotated into world axes first.
    The centre sits at ``radius * n_hat`` from the contact point.
    """
    n = np.asarray(n_hat, dtype=float)
    if abs(float(np.linalg.norm(n)) - 1.0) > 1e-9:
        raise InvalidParameter(f"contact normal must be unit length, |n| = {np.linalg.norm(n)}")
    i0 = params.i_body if orientation is None else params.i_body.rotated(orientation)
    return parallel_axis(i0, params.mass, params.radius * n)
