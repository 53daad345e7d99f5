"""Oriented 3D boxes, pinhole cameras, corner projection, and box edits.

Conventions used everywhere in this package:

  World frame (right-handed): +z is up.
  Camera frame (right-handed, computer vision): x right, y down, z forward.
  Image coordinates: origin top-left; ``w`` is the horizontal fraction
  (column / width), ``h`` the vertical fraction (row / height). Projected
  depth ``d`` is camera-frame z divided by ``z_ref``.

All functions are pure and operate on float64 numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCamera, DegenerateBox, InvalidScale

# Depth (camera-frame z, meters) below which a point counts as behind the camera.
EPS_DEPTH = 1e-3

# Normalization constant for projected depths, meters.
DEFAULT_Z_REF = 10.0

_UNIT_TOL = 1e-9

# Object-frame sign pattern of the 8 box corners, in the documented order:
# bit 2 = x, bit 1 = y, bit 0 = z; 0 means -size/2, 1 means +size/2.
_CORNER_SIGNS = np.array(
    [
        [-1, -1, -1],
        [-1, -1, +1],
        [-1, +1, -1],
        [-1, +1, +1],
        [+1, -1, -1],
        [+1, -1, +1],
        [+1, +1, -1],
        [+1, +1, +1],
    ],
    dtype=np.float64,
)

# Wireframe edges over the corner order above (used by fixture export / UI).
BOX_EDGES = (
    (0, 1), (0, 2), (0, 4), (1, 3), (1, 5), (2, 3),
    (2, 6), (3, 7), (4, 5), (4, 6), (5, 7), (6, 7),
)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) to 3x3 rotation matrix."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ],
        dtype=np.float64,
    )


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b for (w, x, y, z) quaternions."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        dtype=np.float64,
    )


def yaw_quat(theta: float) -> np.ndarray:
    """Quaternion for a rotation of ``theta`` radians about world up (+z)."""
    return np.array([math.cos(theta / 2), 0.0, 0.0, math.sin(theta / 2)])


def yaw_of_rotation(rot: np.ndarray) -> float:
    """Heading angle about +z recovered from a rotation matrix."""
    return math.atan2(rot[1, 0], rot[0, 0])


def _check_rotation(rot: np.ndarray, tol: float = _UNIT_TOL) -> None:
    if not np.allclose(rot @ rot.T, np.eye(3), atol=tol):
        raise ValueError("rotation matrix is not orthonormal")
    if abs(np.linalg.det(rot) - 1.0) > max(tol, 1e-9):
        raise ValueError("rotation matrix determinant is not +1")


@dataclass(frozen=True)
class Box3D:
    """World-space oriented box: center, positive extents, unit quaternion."""

    center: np.ndarray
    size: np.ndarray
    quat: np.ndarray  # (w, x, y, z), rotation world <- object

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(3))
        object.__setattr__(self, "size", np.asarray(self.size, dtype=np.float64).reshape(3))
        object.__setattr__(self, "quat", np.asarray(self.quat, dtype=np.float64).reshape(4))
        if not np.all(self.size > 0):
            raise ValueError(f"box size must be positive, got {self.size.tolist()}")
        norm = np.linalg.norm(self.quat)
        if abs(norm - 1.0) > _UNIT_TOL:
            raise ValueError(f"quaternion norm {norm} is not 1 within {_UNIT_TOL}")

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.quat)

    def corners(self) -> np.ndarray:
        """All 8 world-space corners, shape (8, 3), in the documented order."""
        offsets = _CORNER_SIGNS * (self.size / 2.0)
        return self.center + offsets @ self.rotation.T

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "size": self.size.tolist(),
            "quat": self.quat.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Box3D":
        if "quat" in d:
            quat = np.asarray(d["quat"], dtype=np.float64)
        else:
            # Heading-only annotations: pitch and roll read as 0.
            quat = yaw_quat(float(d.get("yaw", 0.0)))
        return cls(center=d["center"], size=d["size"], quat=quat)


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation mapping points p -> R @ p + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "rotation", np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        )
        object.__setattr__(
            self, "translation", np.asarray(self.translation, dtype=np.float64).reshape(3)
        )
        _check_rotation(self.rotation, tol=1e-8)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Apply ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rot_inv = self.rotation.T
        return RigidTransform(rot_inv, -rot_inv @ self.translation)

    def flat12(self) -> np.ndarray:
        """Flattened 3x4 [R | t], row-major, shape (12,)."""
        return np.hstack([self.rotation, self.translation[:, None]]).reshape(-1)

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.tolist(), "translation": self.translation.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "RigidTransform":
        return cls(np.asarray(d["rotation"]), np.asarray(d["translation"]))


# Relative camera pose (target-camera <- source-camera) is a plain rigid
# transform; see relative_camera_pose().
RelativePose = RigidTransform


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera: intrinsics in pixels, extrinsics camera <- world."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    extrinsics: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise ValueError("principal point must lie inside the image")

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        return self.extrinsics.apply(points)

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
            "extrinsics": self.extrinsics.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            width=int(d["width"]),
            height=int(d["height"]),
            extrinsics=RigidTransform.from_dict(d["extrinsics"])
            if "extrinsics" in d
            else RigidTransform.identity(),
        )


@dataclass(frozen=True)
class Box2D:
    """Axis-aligned image box in normalized fractions, x horizontal, y vertical."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise DegenerateBox(
                f"box2d has no area: ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def dilated(self, fraction: float) -> "Box2D":
        dx = (self.x_max - self.x_min) * fraction / 2.0
        dy = (self.y_max - self.y_min) * fraction / 2.0
        return Box2D(self.x_min - dx, self.y_min - dy, self.x_max + dx, self.y_max + dy)

    def to_dict(self) -> dict:
        return {
            "x_min": self.x_min,
            "y_min": self.y_min,
            "x_max": self.x_max,
            "y_max": self.y_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Box2D":
        return cls(float(d["x_min"]), float(d["y_min"]), float(d["x_max"]), float(d["y_max"]))


def spanning_corners(box: Box3D) -> np.ndarray:
    """Four corners acting as an image-space local frame of the box.

    Returns shape (4, 3): P0 is the minimum object-frame corner mapped to
    world; P1, P2, P3 are P0 displaced by the full extent along each rotated
    local axis.
    """
    rot = box.rotation
    p0 = box.center + rot @ (-box.size / 2.0)
    axes = rot * box.size  # column k = size[k] * rotated axis k
    return np.stack([p0, p0 + axes[:, 0], p0 + axes[:, 1], p0 + axes[:, 2]])


def project_corner(
    point: np.ndarray,
    cam: CameraModel,
    z_ref: float = DEFAULT_Z_REF,
    eps_depth: float = EPS_DEPTH,
) -> tuple[float, float, float]:
    """Project a world point to normalized (h, w, d).

    h and w may leave [0, 1] for points outside the frame; only depths at or
    below ``eps_depth`` are an error.
    """
    pc = cam.world_to_camera(np.asarray(point, dtype=np.float64).reshape(3))
    x_c, y_c, z_c = pc
    if z_c <= eps_depth:
        raise BehindCamera(f"camera-frame depth {z_c} <= {eps_depth}")
    h = (cam.fy * (y_c / z_c) + cam.cy) / cam.height
    w = (cam.fx * (x_c / z_c) + cam.cx) / cam.width
    return float(h), float(w), float(z_c / z_ref)


def pose_vector(
    box: Box3D,
    cam: CameraModel,
    z_ref: float = DEFAULT_Z_REF,
    eps_depth: float = EPS_DEPTH,
) -> np.ndarray:
    """12-entry pose vector: (h, w, d) for each of the four spanning corners."""
    entries = []
    for corner in spanning_corners(box):
        entries.extend(project_corner(corner, cam, z_ref=z_ref, eps_depth=eps_depth))
    return np.array(entries, dtype=np.float64)


def box2d_from_box3d(
    box: Box3D, cam: CameraModel, eps_depth: float = EPS_DEPTH
) -> Box2D:
    """Tight axis-aligned bounds of the 8 projected corners, clamped to [0, 1]."""
    hs, ws = [], []
    for corner in box.corners():
        h, w, _ = project_corner(corner, cam, eps_depth=eps_depth)
        hs.append(h)
        ws.append(w)
    x_min = max(0.0, min(ws))
    x_max = min(1.0, max(ws))
    y_min = max(0.0, min(hs))
    y_max = min(1.0, max(hs))
    return Box2D(x_min, y_min, x_max, y_max)


def edit_box(box: Box3D, op: str, params) -> Box3D:
    """Apply a named edit: translate (3-vector), rotate_yaw (radians about the
    box center, world up) or rescale (positive scalar)."""
    if op == "translate":
        delta = np.asarray(params, dtype=np.float64).reshape(3)
        return Box3D(box.center + delta, box.size, box.quat)
    if op == "rotate_yaw":
        theta = float(params)
        quat = quat_multiply(yaw_quat(theta), box.quat)
        quat = quat / np.linalg.norm(quat)
        return Box3D(box.center, box.size, quat)
    if op == "rescale":
        s = float(params)
        if s <= 0:
            raise InvalidScale(f"rescale factor must be positive, got {s}")
        return Box3D(box.center, box.size * s, box.quat)
    raise ValueError(f"unknown edit op {op!r}")


def alt_pose_vector(
    box: Box3D,
    cam: CameraModel,
    z_ref: float = DEFAULT_Z_REF,
    eps_depth: float = EPS_DEPTH,
) -> np.ndarray:
    """Alternative 10-scalar pose encoding: projected center, scaled size,
    heading sin/cos, two padding zeros. Selected by ``pose_repr = center``."""
    h, w, d = project_corner(box.center, cam, z_ref=z_ref, eps_depth=eps_depth)
    yaw = yaw_of_rotation(box.rotation)
    return np.array(
        [h, w, d, *(box.size / z_ref), math.sin(yaw), math.cos(yaw), 0.0, 0.0],
        dtype=np.float64,
    )


def relative_camera_pose(src: CameraModel, tgt: CameraModel) -> RigidTransform:
    """Rigid transform target-camera <- source-camera."""
    return tgt.extrinsics.compose(src.extrinsics.inverse())


def look_at(eye: np.ndarray, target: np.ndarray, up: np.ndarray | None = None) -> RigidTransform:
    """Extrinsics (camera <- world) for a camera at ``eye`` looking at ``target``."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.array([0.0, 0.0, 1.0]) if up is None else np.asarray(up, dtype=np.float64)
    forward = target - eye
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ValueError("eye and target coincide")
    z_cam = forward / norm
    x_cam = np.cross(z_cam, up)
    x_norm = np.linalg.norm(x_cam)
    if x_norm < 1e-12:
        raise ValueError("view direction is parallel to up")
    x_cam = x_cam / x_norm
    y_cam = np.cross(z_cam, x_cam)
    rot = np.stack([x_cam, y_cam, z_cam])
    return RigidTransform(rot, -rot @ eye)
