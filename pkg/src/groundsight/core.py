"""Geometric domain types and the two primitives everything else builds on.

Frame conventions
-----------------
Point clouds live in a camera-centred frame with ``x`` to the right, ``y`` up
and ``z`` forward, in meters.  Depth back-projection produces the usual
optical frame (``y`` down); :func:`optical_to_camera` flips ``y`` to get here.

IMU alignment maps a raw cloud into a gravity-aligned frame (gravity along
``-y``) with ``R = Rz(roll) @ Rx(pitch)`` using right-handed elementary
rotations.  Positive pitch means the camera looks down: the optical axis
``(0, 0, 1)`` of a camera pitched by ``pi/2`` ends up at ``(0, -1, 0)``.
Pitch is applied first, then roll.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import AttitudeOutOfRange, DimensionMismatch, FrameMismatch

NORMAL_TOL = 1e-9


class Frame(str, enum.Enum):
    RAW = "raw"
    IMU_ALIGNED = "imu_aligned"


@dataclass(frozen=True)
class PointCloud:
    """An (n, 3) float64 array of points plus the frame it is expressed in.

    Use :meth:`from_array` for untrusted input: it drops non-finite rows.
    """

    points: np.ndarray
    frame: Frame = Frame.RAW

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise DimensionMismatch(f"points must have shape (n, 3), got {pts.shape}")
        pts = pts.view()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "frame", Frame(self.frame))

    @classmethod
    def from_array(cls, arr, frame: Frame = Frame.RAW) -> "PointCloud":
        pts = np.asarray(arr, dtype=np.float64).reshape(-1, 3)
        keep = np.isfinite(pts).all(axis=1)
        if not keep.all():
            pts = pts[keep]
        return cls(pts, frame)

    def __len__(self) -> int:
        return self.points.shape[0]

    def subset(self, index) -> "PointCloud":
        return PointCloud(self.points[index], self.frame)


@dataclass(frozen=True)
class ImuAttitude:
    pitch: float = 0.0
    roll: float = 0.0

    def __post_init__(self):
        for name in ("pitch", "roll"):
            v = float(getattr(self, name))
            # float(pi/2) is below the true pi/2, so it is still admissible.
            if not math.isfinite(v) or abs(v) > math.pi / 2:
                raise AttitudeOutOfRange(f"{name}={v} rad outside (-pi/2, pi/2)")
            object.__setattr__(self, name, v)

    def matrix(self) -> np.ndarray:
        """Rotation taking raw camera coordinates to the gravity-aligned frame."""
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        cr, sr = math.cos(self.roll), math.sin(self.roll)
        rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
        rz = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
        return rz @ rx


@dataclass(frozen=True)
class PlaneModel:
    """Plane ``n . p + d = 0`` with unit normal and ``normal[1] >= 0``.

    Build from arbitrary coefficients with :meth:`from_coefficients`, which
    rescales and flips sign as needed without changing the zero set.
    """

    normal: tuple
    offset: float

    def __post_init__(self):
        n = tuple(float(v) for v in self.normal)
        if len(n) != 3:
            raise DimensionMismatch("normal must have 3 components")
        norm = math.sqrt(n[0] ** 2 + n[1] ** 2 + n[2] ** 2)
        if abs(norm - 1.0) > NORMAL_TOL:
            raise ValueError(f"normal is not unit length (|n|={norm})")
        if _orientation_sign(n) < 0:
            raise ValueError("normal violates the y >= 0 orientation convention")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_coefficients(cls, a: float, b: float, c: float, d: float) -> "PlaneModel":
        v = np.array([a, b, c, d], dtype=np.float64)
        norm = float(np.linalg.norm(v[:3]))
        if not norm > 0.0 or not np.isfinite(v).all():
            raise ValueError("plane coefficients must be finite with a non-zero normal")
        v /= norm
        if _orientation_sign(v[:3]) < 0:
            v = -v
        return cls(tuple(v[:3]), v[3])

    @property
    def normal_array(self) -> np.ndarray:
        return np.array(self.normal)

    def distances(self, points: np.ndarray) -> np.ndarray:
        """Vectorised :func:`signed_distance` over an (n, 3) array."""
        return np.asarray(points, dtype=np.float64) @ self.normal_array + self.offset

    def angle_to(self, other: "PlaneModel") -> float:
        """Angle between the two normals in radians."""
        dot = float(np.clip(self.normal_array @ other.normal_array, -1.0, 1.0))
        return math.acos(dot)


def _orientation_sign(n) -> int:
    # y decides; exact zeros fall through to x, then z, for determinism.
    for k in (1, 0, 2):
        if n[k] > 0:
            return 1
        if n[k] < 0:
            return -1
    return 1


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def check_image(self, img: np.ndarray, what: str = "image") -> None:
        if img.shape[:2] != (self.height, self.width):
            raise DimensionMismatch(
                f"{what} is {img.shape[1]}x{img.shape[0]}, intrinsics expect "
                f"{self.width}x{self.height}"
            )

    def project(self, points_optical: np.ndarray) -> np.ndarray:
        """Project optical-frame points to (u, v) pixel coordinates."""
        p = np.asarray(points_optical, dtype=np.float64)
        return np.stack(
            [self.fx * p[..., 0] / p[..., 2] + self.cx, self.fy * p[..., 1] / p[..., 2] + self.cy],
            axis=-1,
        )

    def pixel_rays(self) -> np.ndarray:
        """Optical-frame ray directions (z = 1) for every pixel, shape (h, w, 3)."""
        u = (np.arange(self.width, dtype=np.float64) - self.cx) / self.fx
        v = (np.arange(self.height, dtype=np.float64) - self.cy) / self.fy
        rays = np.empty((self.height, self.width, 3))
        rays[..., 0] = u[None, :]
        rays[..., 1] = v[:, None]
        rays[..., 2] = 1.0
        return rays


def optical_to_camera(points: np.ndarray) -> np.ndarray:
    """Flip the optical frame's downward y to the pipeline's upward y."""
    out = np.array(points, dtype=np.float64, copy=True)
    out[..., 1] *= -1.0
    return out


def signed_distance(plane: PlaneModel, p) -> float:
    a, b, c = plane.normal
    return a * p[0] + b * p[1] + c * p[2] + plane.offset


def rotate_attitude(cloud: PointCloud, att: ImuAttitude) -> PointCloud:
    """Rotate a raw cloud into the gravity-aligned frame."""
    if cloud.frame is not Frame.RAW:
        raise FrameMismatch(f"expected a raw cloud, got {cloud.frame.value}")
    R = att.matrix()
    return PointCloud(cloud.points @ R.T, Frame.IMU_ALIGNED)
