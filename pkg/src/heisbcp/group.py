"""Arithmetic of the first Heisenberg group H = R^2 x R.

Points are written (v, z) with v planar and z vertical. The group law is

    (v, z) . (v', z') = (v + v', z + z' + omega(v, v') / 2)

with omega the standard symplectic form on R^2. Inverses are negatives and
dilations scale v linearly and z quadratically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "PlanarVector",
    "GroupPoint",
    "TangentVector",
    "IDENTITY",
    "omega",
    "group_mul",
    "group_inv",
    "dilate",
    "translate_pushforward",
    "unoriented_angle",
    "oriented_angle",
]


def _finite(*values: float) -> None:
    for value in values:
        if not math.isfinite(value):
            raise ValueError(f"non-finite coordinate: {value!r}")


@dataclass(frozen=True, slots=True)
class PlanarVector:
    x: float
    y: float

    def __post_init__(self):
        _finite(self.x, self.y)

    def __add__(self, other: PlanarVector) -> PlanarVector:
        return PlanarVector(self.x + other.x, self.y + other.y)

    def __sub__(self, other: PlanarVector) -> PlanarVector:
        return PlanarVector(self.x - other.x, self.y - other.y)

    def __neg__(self) -> PlanarVector:
        return PlanarVector(-self.x, -self.y)

    def scale(self, t: float) -> PlanarVector:
        return PlanarVector(t * self.x, t * self.y)

    def dot(self, other: PlanarVector) -> float:
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True, slots=True)
class GroupPoint:
    v: PlanarVector
    z: float

    def __post_init__(self):
        _finite(self.z)

    @classmethod
    def of(cls, x: float, y: float, z: float) -> GroupPoint:
        return cls(PlanarVector(float(x), float(y)), float(z))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.v.x, self.v.y, self.z)


@dataclass(frozen=True, slots=True)
class TangentVector:
    """A vector of R^3, used for pushforwards of planar directions."""

    v: PlanarVector
    z: float

    def __post_init__(self):
        _finite(self.z)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.v.x, self.v.y, self.z)


IDENTITY = GroupPoint(PlanarVector(0.0, 0.0), 0.0)


def omega(v: PlanarVector, w: PlanarVector) -> float:
    return v.x * w.y - v.y * w.x


def group_mul(p: GroupPoint, q: GroupPoint) -> GroupPoint:
    return GroupPoint(p.v + q.v, p.z + q.z + 0.5 * omega(p.v, q.v))


def group_inv(p: GroupPoint) -> GroupPoint:
    return GroupPoint(-p.v, -p.z)


def dilate(t: float, p: GroupPoint) -> GroupPoint:
    if not t >= 0:
        raise ValueError(f"dilation factor must be nonnegative, got {t!r}")
    return GroupPoint(p.v.scale(t), t * t * p.z)


def translate_pushforward(q: GroupPoint, v: PlanarVector) -> TangentVector:
    """Differential of left translation by ``q`` applied to the horizontal vector ``v``."""
    return TangentVector(v, 0.5 * omega(q.v, v))


def unoriented_angle(v: PlanarVector, w: PlanarVector) -> float:
    nv, nw = v.norm(), w.norm()
    if nv == 0.0 or nw == 0.0:
        raise ValueError("angle undefined for a zero vector")
    # atan2 stays accurate near 0 and pi, where acos of the cosine does not
    return math.atan2(abs(omega(v, w)), v.dot(w))


def oriented_angle(v: PlanarVector, w: PlanarVector) -> float:
    """Signed angle from ``v`` to ``w`` in (-pi, pi).

    Undefined (raises ``ValueError``) when ``w`` points opposite to ``v``.
    """
    angle = unoriented_angle(v, w)
    om = omega(v, w)
    if om == 0.0:
        if v.dot(w) < 0.0:
            raise ValueError("oriented angle undefined for antiparallel vectors")
        return 0.0
    return math.copysign(angle, om)
