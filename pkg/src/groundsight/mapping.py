"""2-D occupancy and traversability grids on the ground plane.

Grids index cells as ``[iz, ix]`` where ``ix = floor((x - origin_x) / res)``
and ``iz = floor((z - origin_z) / res)`` in the gravity-aligned frame.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core import CameraIntrinsics, ImuAttitude, PlaneModel, PointCloud, optical_to_camera
from .errors import DimensionMismatch, LengthMismatch
from .io import write_pgm
from .plane import Label

PARALLEL_EPS = 1e-9


class Occupancy(enum.IntEnum):
    FREE = 0
    OCCUPIED = 1
    UNKNOWN = 2


class Traversability(enum.IntEnum):
    DRIVABLE = 0
    ANOMALY = 1
    UNKNOWN = 2


_OCC_GRAY = np.array([255, 0, 127], dtype=np.uint8)
_TRAV_GRAY = np.array([255, 0, 127], dtype=np.uint8)


@dataclass(frozen=True)
class GridConfig:
    resolution: float = 0.05
    origin_x: float = -5.0
    origin_z: float = 0.0
    width_cells: int = 200
    height_cells: int = 200

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if int(self.width_cells) != self.width_cells or int(self.height_cells) != self.height_cells:
            raise ValueError("grid dimensions must be integers")
        if self.width_cells < 1 or self.height_cells < 1:
            raise ValueError("grid dimensions must be >= 1")

    @property
    def shape(self) -> tuple:
        return (int(self.height_cells), int(self.width_cells))

    def cell_indices(self, x, z):
        """(ix, iz, inside) for arrays of x and z coordinates."""
        ix = np.floor((np.asarray(x, dtype=np.float64) - self.origin_x) / self.resolution)
        iz = np.floor((np.asarray(z, dtype=np.float64) - self.origin_z) / self.resolution)
        inside = (ix >= 0) & (ix < self.width_cells) & (iz >= 0) & (iz < self.height_cells)
        ix = np.where(inside, ix, 0).astype(np.int64)
        iz = np.where(inside, iz, 0).astype(np.int64)
        return ix, iz, inside


@dataclass
class _Grid:
    config: GridConfig
    cells: np.ndarray  # (height_cells, width_cells) uint8 enum values

    def at(self, ix: int, iz: int):
        return self._enum(int(self.cells[iz, ix]))

    def count(self, state) -> int:
        return int(np.count_nonzero(self.cells == state))

    def to_gray(self) -> np.ndarray:
        return self._gray[self.cells]

    def save(self, pgm_path, json_path) -> None:
        write_pgm(pgm_path, self.to_gray())
        Path(json_path).write_text(json.dumps(asdict(self.config), indent=2) + "\n")


class OccupancyGrid(_Grid):
    _enum = Occupancy
    _gray = _OCC_GRAY


class TraversabilityGrid(_Grid):
    _enum = Traversability
    _gray = _TRAV_GRAY


def project_occupancy(result, cloud_aligned: PointCloud, cfg: GridConfig) -> OccupancyGrid:
    """Drop labelled points onto the x-z grid; obstacles win over ground."""
    labels = np.asarray(result.labels if hasattr(result, "labels") else result)
    pts = cloud_aligned.points
    if labels.shape != (len(pts),):
        raise LengthMismatch(f"{labels.shape[0]} labels for {len(pts)} points")
    cells = np.full(cfg.shape, Occupancy.UNKNOWN, dtype=np.uint8)
    ix, iz, inside = cfg.cell_indices(pts[:, 0], pts[:, 2])
    ground = inside & (labels == Label.GROUND)
    obstacle = inside & (labels == Label.OBSTACLE)
    cells[iz[ground], ix[ground]] = Occupancy.FREE
    cells[iz[obstacle], ix[obstacle]] = Occupancy.OCCUPIED
    return OccupancyGrid(cfg, cells)


def pixel_rays_aligned(intr: CameraIntrinsics, att: ImuAttitude) -> np.ndarray:
    """Per-pixel ray directions in the gravity-aligned frame, shape (h, w, 3)."""
    rays = optical_to_camera(intr.pixel_rays())
    return rays @ att.matrix().T


def intersect_plane(rays: np.ndarray, plane: PlaneModel):
    """Ray-plane intersection for rays from the origin.

    Returns (points, valid); rays nearly parallel to the plane or meeting it
    at non-positive range are invalid and their points are NaN.
    """
    n = plane.normal_array
    denom = rays @ n
    ok = np.abs(denom) >= PARALLEL_EPS
    t = np.full(denom.shape, np.nan)
    np.divide(-plane.offset, denom, out=t, where=ok)
    valid = ok & (t > 0)
    t = np.where(valid, t, np.nan)
    return rays * t[..., None], valid


def project_to_pixel(points_aligned: np.ndarray, intr: CameraIntrinsics, att: ImuAttitude) -> np.ndarray:
    """Continuous (u, v) of gravity-aligned points; inverse of the ray cast."""
    cam = np.asarray(points_aligned, dtype=np.float64) @ att.matrix()
    return intr.project(optical_to_camera(cam))


def cast_pixels(u, v, intr: CameraIntrinsics, att: ImuAttitude, plane: PlaneModel):
    """Ground-plane points hit by the rays through (possibly fractional) pixels."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    rays = np.stack([(u - intr.cx) / intr.fx, -(v - intr.cy) / intr.fy, np.ones_like(u)], axis=-1)
    return intersect_plane(rays @ att.matrix().T, plane)


def traversability_from_mask(
    mask: np.ndarray,
    plane: PlaneModel,
    intr: CameraIntrinsics,
    att: ImuAttitude,
    cfg: GridConfig,
) -> TraversabilityGrid:
    """Re-project a drivable-area image mask onto the ground plane grid.

    Occlusions are ignored.  Where pixels disagree about a cell, anomaly wins.
    """
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise DimensionMismatch(f"mask must be 2-D, got shape {mask.shape}")
    intr.check_image(mask, "mask")
    hits, valid = intersect_plane(pixel_rays_aligned(intr, att), plane)
    ix, iz, inside = cfg.cell_indices(hits[..., 0], hits[..., 2])
    use = valid & inside
    drivable = use & (mask != 0)
    anomaly = use & (mask == 0)
    cells = np.full(cfg.shape, Traversability.UNKNOWN, dtype=np.uint8)
    cells[iz[drivable], ix[drivable]] = Traversability.DRIVABLE
    cells[iz[anomaly], ix[anomaly]] = Traversability.ANOMALY
    return TraversabilityGrid(cfg, cells)
