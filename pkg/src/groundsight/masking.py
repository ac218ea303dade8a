"""Depth back-projection and ground-plane masking of registered RGB frames."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import CameraIntrinsics, Frame, ImuAttitude, PlaneModel, PointCloud, optical_to_camera
from .errors import DimensionMismatch


class MissingDepth(str, enum.Enum):
    BLACKEN = "blacken"
    KEEP = "keep"


@dataclass(frozen=True)
class MaskingParams:
    ground_threshold: float = 0.05
    treat_missing_depth: MissingDepth = MissingDepth.BLACKEN

    def __post_init__(self):
        if not self.ground_threshold > 0:
            raise ValueError("ground_threshold must be positive")
        object.__setattr__(self, "treat_missing_depth", MissingDepth(self.treat_missing_depth))


@dataclass(frozen=True)
class BackProjection:
    """Points in the optical frame (y down) with the pixel each came from."""

    points: np.ndarray  # (m, 3) meters
    pixels: np.ndarray  # (m, 2) integer (u, v)

    def cloud(self) -> PointCloud:
        """The points as a raw cloud in the pipeline's y-up camera frame."""
        return PointCloud(optical_to_camera(self.points), Frame.RAW)


def _check_depth(depth, intr: CameraIntrinsics) -> np.ndarray:
    depth = np.asarray(depth)
    if depth.ndim != 2:
        raise DimensionMismatch(f"depth must be 2-D, got shape {depth.shape}")
    intr.check_image(depth, "depth")
    return depth


def _backproject(depth_mm: np.ndarray, intr: CameraIntrinsics) -> np.ndarray:
    z = depth_mm.astype(np.float64) / 1000.0
    h, w = depth_mm.shape
    u = np.arange(w, dtype=np.float64)[None, :]
    v = np.arange(h, dtype=np.float64)[:, None]
    out = np.empty((h, w, 3))
    out[..., 0] = (u - intr.cx) * z / intr.fx
    out[..., 1] = (v - intr.cy) * z / intr.fy
    out[..., 2] = z
    return out


def depth_to_points(depth: np.ndarray, intr: CameraIntrinsics) -> BackProjection:
    """Pinhole back-projection of a millimeter depth image.

    Pixels with zero (or non-finite) depth produce no point.  Points come out
    in row-major pixel order.
    """
    depth = _check_depth(depth, intr)
    pts = _backproject(depth, intr)
    valid = (depth > 0) & np.isfinite(depth)
    vv, uu = np.nonzero(valid)
    return BackProjection(pts[valid], np.stack([uu, vv], axis=1))


def ground_distance_image(depth, plane: PlaneModel, intr: CameraIntrinsics, att: ImuAttitude) -> np.ndarray:
    """Signed plane distance of every pixel's aligned point; NaN without depth."""
    depth = _check_depth(depth, intr)
    aligned = optical_to_camera(_backproject(depth, intr)) @ att.matrix().T
    dist = plane.distances(aligned.reshape(-1, 3)).reshape(depth.shape)
    dist[~((depth > 0) & np.isfinite(depth))] = np.nan
    return dist


def mask_ground(
    rgb: np.ndarray,
    depth: np.ndarray,
    plane: PlaneModel,
    intr: CameraIntrinsics,
    att: ImuAttitude,
    params: MaskingParams | None = None,
) -> np.ndarray:
    """Black out every pixel whose depth point is not on the ground plane."""
    params = params or MaskingParams()
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DimensionMismatch(f"rgb must be (h, w, 3), got {rgb.shape}")
    intr.check_image(rgb, "rgb")
    dist = ground_distance_image(depth, plane, intr, att)
    missing = np.isnan(dist)
    keep = np.abs(np.where(missing, np.inf, dist)) <= params.ground_threshold
    if params.treat_missing_depth is MissingDepth.KEEP:
        keep |= missing
    out = rgb.copy()
    out[~keep] = 0
    return out
