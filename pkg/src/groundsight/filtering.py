"""Pre-fit candidate filters: anisotropic voxel grid and radius outlier removal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import PointCloud
from .errors import EmptyCloud

# Dense voxel accumulation is used while the occupied index box stays below
# this many cells (or 8 cells per input point, whichever is larger).
_DENSE_VOXEL_LIMIT = 1 << 22


@dataclass(frozen=True)
class VoxelGridParams:
    cell_x: float = 0.03
    cell_y: float = 0.2
    cell_z: float = 0.03

    def __post_init__(self):
        if not (self.cell_x > 0 and self.cell_y > 0 and self.cell_z > 0):
            raise ValueError("voxel cell sizes must be positive")

    @property
    def cell(self) -> np.ndarray:
        return np.array([self.cell_x, self.cell_y, self.cell_z], dtype=np.float64)


@dataclass(frozen=True)
class RadiusFilterParams:
    # Engineering defaults; not published values.
    radius: float = 0.15
    min_neighbors: int = 5

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if int(self.min_neighbors) != self.min_neighbors or self.min_neighbors < 1:
            raise ValueError("min_neighbors must be an integer >= 1")


def voxel_grid_downsample(cloud: PointCloud, params: VoxelGridParams) -> PointCloud:
    """Replace the points of every occupied voxel by their centroid.

    Voxel index is ``floor(coord / cell)`` per axis with the origin as grid
    origin. Output voxels are ordered lexicographically by (ix, iy, iz).
    """
    if len(cloud) == 0:
        raise EmptyCloud("voxel_grid_downsample needs at least one point")
    pts = np.ascontiguousarray(cloud.points)
    cell = params.cell
    box = _index_box(pts, cell)
    if box is not None and float(np.prod((box[1] - box[0] + 1).astype(np.float64))) <= max(
        _DENSE_VOXEL_LIMIT, 8 * len(pts)
    ):
        out = _kernels.voxel_dense(pts, cell, *box)
    else:
        out = _voxel_sorted(pts, cell)
    return PointCloud(out, cloud.frame)


def _voxel_sorted(pts: np.ndarray, cell: np.ndarray) -> np.ndarray:
    idx = np.floor(pts / cell).astype(np.int64)
    keys, inverse, counts = np.unique(idx, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    m = keys.shape[0]
    out = np.empty((m, 3))
    for a in range(3):
        out[:, a] = np.bincount(inverse, weights=pts[:, a], minlength=m) / counts
    return out


class KdTree:
    """Balanced 3-D kd-tree over a fixed point set, immutable after build.

    Counts use closed balls (``distance <= r``).
    """

    def __init__(self, points: np.ndarray, leaf_size: int = 16):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] == 0:
            raise EmptyCloud("KdTree needs a non-empty (n, 3) point array")
        perm, spts, axes, lo, hi, used, leaf_of = _kernels.build(pts, int(leaf_size))
        self._perm = perm
        # points stored in tree order so leaf scans are contiguous
        self._spts = spts
        self._nodes = (axes, lo, hi, used)
        self._leaf_of = leaf_of
        self._pts = pts.copy()
        self._pts.flags.writeable = False

    @property
    def points(self) -> np.ndarray:
        return self._pts

    def __len__(self) -> int:
        return self._pts.shape[0]

    def radius_count(self, p, r: float) -> int:
        """Number of tree points within ``r`` of ``p``, excluding ``p`` itself
        when ``p`` is a member of the tree."""
        q = np.asarray(p, dtype=np.float64).reshape(3)
        count, exact = _kernels.count_within(self._spts, *self._nodes, q, float(r) * float(r), 0)
        return int(count - 1 if exact else count)

    def member_neighbor_counts(self, r: float, cap: int = 0) -> np.ndarray:
        """Neighbor count of every tree point (self excluded).

        With ``cap > 0`` counting stops at ``cap`` neighbors, which is all a
        threshold test needs.
        """
        inner_cap = cap + 1 if cap > 0 else 0
        in_tree_order = _kernels.member_counts(
            self._spts, *self._nodes, self._leaf_of, float(r) * float(r), inner_cap
        )
        counts = np.empty_like(in_tree_order)
        counts[self._perm] = in_tree_order
        return counts - 1


def build_kdtree(cloud: PointCloud) -> KdTree:
    if len(cloud) == 0:
        raise EmptyCloud("cannot build a kd-tree over an empty cloud")
    return KdTree(cloud.points)


def radius_count(tree: KdTree, p, r: float) -> int:
    return tree.radius_count(p, r)


def radius_outlier_removal(cloud: PointCloud, params: RadiusFilterParams) -> PointCloud:
    """Keep points with at least ``min_neighbors`` others within ``radius``."""
    if len(cloud) == 0:
        raise EmptyCloud("radius_outlier_removal needs at least one point")
    k = int(params.min_neighbors)
    counts = member_neighbor_counts(cloud.points, params.radius, cap=k)
    return cloud.subset(counts >= k)


def member_neighbor_counts(points: np.ndarray, r: float, cap: int = 0) -> np.ndarray:
    """Neighbors within ``r`` of every point, self excluded, capped at ``cap``.

    Bucket grids are cheaper to build than a tree, so they are used whenever
    the cube grid over the cloud stays small; otherwise a :class:`KdTree`.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    # slightly oversized cells keep every neighbor within one cell under rounding
    cell = float(r) * (1.0 + 1e-9)
    box = _index_box(pts, np.full(3, cell))
    if box is not None:
        mn, mx = box
        if float(np.prod((mx - mn + 1).astype(np.float64))) <= max(_DENSE_VOXEL_LIMIT, 8 * len(pts)):
            inner_cap = cap + 1 if cap > 0 else 0
            return _kernels.grid_member_counts(pts, cell, mn, mx, float(r) * float(r), inner_cap) - 1
    return KdTree(pts).member_neighbor_counts(r, cap=cap)


def _index_box(pts: np.ndarray, cell: np.ndarray):
    """Integer cell index bounds, or None if they would not fit in int64."""
    pmin, pmax = _kernels.bounds(pts)
    lo = np.floor(pmin / cell)
    hi = np.floor(pmax / cell)
    if not (np.all(np.abs(lo) < 2.0**52) and np.all(np.abs(hi) < 2.0**52)):
        return None
    return lo.astype(np.int64), hi.astype(np.int64)
