"""Arm camera kinematics and the frustum visibility check used for fine perception."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .geometry import Pose2D

Vec3 = tuple[float, float, float]


@dataclass(frozen=True)
class MountTransform:
    """Camera offset in the robot base frame at zero pan/lift."""

    x: float = 0.2
    y: float = 0.0
    z: float = 1.25
    yaw: float = 0.0
    pitch: float = 0.0


@dataclass(frozen=True)
class CameraModel:
    hfov: float = math.radians(60.0)
    vfov: float = math.radians(45.0)
    near: float = 0.3
    far: float = 2.5
    mount: MountTransform = MountTransform()
    pan_range: tuple[float, float] = (-math.pi, math.pi)
    lift_range: tuple[float, float] = (-math.pi / 2, math.pi / 2)

    def __post_init__(self):
        if not 0 < self.near < self.far:
            raise ValueError("camera needs 0 < near < far")
        for fov in (self.hfov, self.vfov):
            if not 0 < fov < math.pi:
                raise ValueError("field of view must lie in (0, pi)")


@dataclass(frozen=True)
class CameraPose:
    position: Vec3
    yaw: float
    pitch: float  # positive tilts the optical axis downwards

    def axes(self) -> tuple[Vec3, Vec3, Vec3]:
        """Forward (optical), left and up unit vectors in the world frame."""
        cy, sy = math.cos(self.yaw), math.sin(self.yaw)
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        forward = (cp * cy, cp * sy, -sp)
        left = (-sy, cy, 0.0)
        up = (sp * cy, sp * sy, cp)
        return forward, left, up


def camera_pose_from_joints(pan: float, lift: float, robot_pose: Pose2D, model: CameraModel) -> CameraPose:
    """Forward kinematics: pan turns the mount about the base's vertical axis, lift pitches the camera."""
    lo, hi = model.pan_range
    if not lo <= pan <= hi:
        raise ValueError(f"pan {pan} outside joint range {model.pan_range}")
    lo, hi = model.lift_range
    if not lo <= lift <= hi:
        raise ValueError(f"lift {lift} outside joint range {model.lift_range}")
    m = model.mount
    heading = robot_pose.theta + pan
    c, s = math.cos(heading), math.sin(heading)
    position = (robot_pose.x + c * m.x - s * m.y, robot_pose.y + s * m.x + c * m.y, m.z)
    return CameraPose(position, heading + m.yaw, m.pitch + lift)


def bbox_vertices(pose: Pose2D, extents: Sequence[float], base_z: float) -> list[Vec3]:
    """The 8 corners of a box resting at height ``base_z`` with yaw ``pose.theta``."""
    hx, hy, dz = extents[0] / 2.0, extents[1] / 2.0, extents[2]
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    corners = []
    for sx in (-hx, hx):
        for sy in (-hy, hy):
            wx = pose.x + c * sx - s * sy
            wy = pose.y + s * sx + c * sy
            corners.append((wx, wy, base_z))
            corners.append((wx, wy, base_z + dz))
    return corners


def frustum_contains_points(camera: CameraPose, model: CameraModel, points: Iterable[Vec3]) -> bool:
    """True iff every point lies inside the near, far and four side planes (boundary inclusive)."""
    forward, left, up = camera.axes()
    th = math.tan(model.hfov / 2.0)
    tv = math.tan(model.vfov / 2.0)
    px, py, pz = camera.position
    for x, y, z in points:
        dx, dy, dz = x - px, y - py, z - pz
        depth = dx * forward[0] + dy * forward[1] + dz * forward[2]
        if depth < model.near or depth > model.far:
            return False
        lateral = dx * left[0] + dy * left[1] + dz * left[2]
        vertical = dx * up[0] + dy * up[1] + dz * up[2]
        if abs(lateral) > depth * th or abs(vertical) > depth * tv:
            return False
    return True


def frustum_contains(camera: CameraPose, model: CameraModel, pose: Pose2D,
                     extents: Sequence[float], base_z: float) -> bool:
    return frustum_contains_points(camera, model, bbox_vertices(pose, extents, base_z))
