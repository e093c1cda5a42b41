"""Planar poses and the small amount of geometry the domain needs."""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    wrapped = math.remainder(theta, TWO_PI)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


@dataclass(frozen=True, slots=True)
class Pose2D:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    def compose(self, other: "Pose2D") -> "Pose2D":
        """Express ``other`` (given in this pose's frame) in the parent frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2D(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )

    def same_place(self, other: "Pose2D", tol: float = 1e-9) -> bool:
        return abs(self.x - other.x) <= tol and abs(self.y - other.y) <= tol

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.theta]

    @classmethod
    def from_seq(cls, seq) -> "Pose2D":
        if len(seq) == 2:
            return cls(float(seq[0]), float(seq[1]))
        return cls(float(seq[0]), float(seq[1]), float(seq[2]))


def distance(a: Pose2D, b: Pose2D) -> float:
    """Euclidean distance in the plane; orientation is ignored."""
    return math.hypot(a.x - b.x, a.y - b.y)


def in_rectangle(x: float, y: float, cx: float, cy: float, width: float, depth: float) -> bool:
    """Axis-aligned containment, boundary inclusive."""
    return abs(x - cx) <= width / 2.0 and abs(y - cy) <= depth / 2.0
