"""Analytic terrain surfaces z = f(x, y).

Every surface exposes ``evaluate(x, y) -> (z, fx, fy)`` with analytic first
partial derivatives. Surfaces are immutable and can be shared freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence


class DomainError(ValueError):
    """Raised when a point lies outside a surface's domain."""


@dataclass(frozen=True)
class TerrainSurface:
    """Base class. ``bounds`` is an optional (xmin, xmax, ymin, ymax) box."""

    bounds: tuple[float, float, float, float] | None = field(default=None, kw_only=True)

    def evaluate(self, x: float, y: float) -> tuple[float, float, float]:
        raise NotImplementedError

    def height(self, x: float, y: float) -> float:
        return self.evaluate(x, y)[0]

    def contains(self, x: float, y: float) -> bool:
        if not (math.isfinite(x) and math.isfinite(y)):
            return False
        if self.bounds is None:
            return True
        xmin, xmax, ymin, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Plane(TerrainSurface):
    """z = a*x + b*y + c."""

    a: float = 0.0
    b: float = 0.0
    c: float = 0.0

    def evaluate(self, x, y):
        return self.a * x + self.b * y + self.c, self.a, self.b

    def to_dict(self):
        return {"kind": "plane", "a": self.a, "b": self.b, "c": self.c}


def flat() -> Plane:
    return Plane()


@dataclass(frozen=True)
class Ramp(TerrainSurface):
    """Inclined plane rising at ``slope`` radians along the horizontal
    direction ``heading`` (radians from +x)."""

    slope: float = math.pi / 8
    heading: float = 0.0

    def __post_init__(self):
        if not abs(self.slope) < math.pi / 2:
            raise ValueError(f"ramp slope must lie in (-pi/2, pi/2), got {self.slope}")

    def evaluate(self, x, y):
        t = math.tan(self.slope)
        fx = t * math.cos(self.heading)
        fy = t * math.sin(self.heading)
        return fx * x + fy * y, fx, fy

    def to_dict(self):
        return {"kind": "ramp", "slope": self.slope, "heading": self.heading}


@dataclass(frozen=True)
class CosineTerrain(TerrainSurface):
    """z = A*(cos(2*pi*x/P) + cos(2*pi*y/P) - 2).

    The defaults (A = 0.5, P = 8) give the undulating test terrain with crests
    at multiples of P and z = 0 at the origin.
    """

    amplitude: float = 0.5
    period: float = 8.0

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("cosine terrain period must be positive")

    def evaluate(self, x, y):
        k = 2.0 * math.pi / self.period
        cx, cy = math.cos(k * x), math.cos(k * y)
        z = self.amplitude * (cx + cy - 2.0)
        fx = -self.amplitude * k * math.sin(k * x)
        fy = -self.amplitude * k * math.sin(k * y)
        return z, fx, fy

    def to_dict(self):
        return {"kind": "cosine", "amplitude": self.amplitude, "period": self.period}


@dataclass(frozen=True)
class GaussianBump(TerrainSurface):
    """z = h * exp(-((x-x0)^2 + (y-y0)^2) / (2 w^2))."""

    height_: float = 0.5
    width: float = 2.0
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("bump width must be positive")

    def evaluate(self, x, y):
        dx, dy = x - self.x0, y - self.y0
        w2 = self.width * self.width
        z = self.height_ * math.exp(-(dx * dx + dy * dy) / (2.0 * w2))
        return z, -z * dx / w2, -z * dy / w2

    def to_dict(self):
        return {"kind": "bump", "height": self.height_, "width": self.width,
                "x0": self.x0, "y0": self.y0}


@dataclass(frozen=True)
class Composite(TerrainSurface):
    """Pointwise sum of component surfaces."""

    components: tuple[TerrainSurface, ...] = ()

    def evaluate(self, x, y):
        z = fx = fy = 0.0
        for comp in self.components:
            cz, cfx, cfy = comp.evaluate(x, y)
            z += cz
            fx += cfx
            fy += cfy
        return z, fx, fy

    def contains(self, x, y):
        return super().contains(x, y) and all(c.contains(x, y) for c in self.components)

    def to_dict(self):
        return {"kind": "composite", "components": [c.to_dict() for c in self.components]}


_SIMPLE_KINDS = {
    "plane": (Plane, {"a": "a", "b": "b", "c": "c"}),
    "flat": (Plane, {}),
    "ramp": (Ramp, {"slope": "slope", "heading": "heading"}),
    "cosine": (CosineTerrain, {"amplitude": "amplitude", "period": "period"}),
    "bump": (GaussianBump, {"height": "height_", "width": "width", "x0": "x0", "y0": "y0"}),
}


def from_dict(spec: dict) -> TerrainSurface:
    """Build a surface from a ``{"kind": ..., <params>}`` mapping.

    Unknown kinds or parameter names raise ``KeyError`` naming the offender.
    """
    spec = dict(spec)
    kind = spec.pop("kind", None)
    bounds = spec.pop("bounds", None)
    kw = {} if bounds is None else {"bounds": tuple(float(b) for b in bounds)}
    if kind == "composite":
        comps = spec.pop("components", [])
        if spec:
            raise KeyError(f"terrain.{next(iter(spec))}")
        return Composite(components=tuple(from_dict(c) for c in comps), **kw)
    if kind not in _SIMPLE_KINDS:
        raise KeyError(f"terrain.kind={kind!r}")
    cls, names = _SIMPLE_KINDS[kind]
    for key, value in spec.items():
        if key not in names:
            raise KeyError(f"terrain.{key}")
        kw[names[key]] = float(value)
    return cls(**kw)


def sum_of(surfaces: Sequence[TerrainSurface]) -> Composite:
    return Composite(components=tuple(surfaces))
