"""Ground plane estimation: seed selection, iterative PCA refinement and
ground/obstacle labelling, composed into :func:`segment_ground`."""

from __future__ import annotations

import enum
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Frame, ImuAttitude, PlaneModel, PointCloud, rotate_attitude
from .errors import AllPointsFiltered, DegenerateGeometry, EmptyCloud, FrameMismatch
from .filtering import (
    RadiusFilterParams,
    VoxelGridParams,
    radius_outlier_removal,
    voxel_grid_downsample,
)

DEGENERACY_RATIO = 1e-12


class Label(enum.IntEnum):
    GROUND = 0
    OBSTACLE = 1


@dataclass(frozen=True)
class RansacParams:
    seed_fraction: float = 0.5
    inlier_threshold: float = 0.025
    max_iterations: int = 10
    convergence_offset: float = 1e-3
    convergence_angle: float = math.radians(0.1)

    def __post_init__(self):
        if not 0.0 < self.seed_fraction <= 1.0:
            raise ValueError("seed_fraction must be in (0, 1]")
        if not self.inlier_threshold > 0:
            raise ValueError("inlier_threshold must be positive")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be an integer >= 1")
        if self.convergence_offset < 0 or self.convergence_angle < 0:
            raise ValueError("convergence tolerances must be non-negative")


@dataclass(frozen=True)
class SegmentationConfig:
    voxel: VoxelGridParams = field(default_factory=VoxelGridParams)
    radius: RadiusFilterParams = field(default_factory=RadiusFilterParams)
    ransac: RansacParams = field(default_factory=RansacParams)
    classify_threshold: float = 0.05

    def __post_init__(self):
        if not self.classify_threshold > 0:
            raise ValueError("classify_threshold must be positive")


@dataclass(frozen=True)
class RansacFit:
    plane: PlaneModel
    converged: bool
    iterations: int
    inlier_mask: np.ndarray
    inlier_counts: tuple


@dataclass
class SegmentationResult:
    plane: PlaneModel
    labels: np.ndarray
    timings_ms: dict
    converged: bool
    iterations: int
    aligned: PointCloud | None = None

    @property
    def ground_mask(self) -> np.ndarray:
        return self.labels == Label.GROUND

    def sidecar(self) -> dict:
        return {
            "normal": list(self.plane.normal),
            "d": self.plane.offset,
            "timings_ms": dict(self.timings_ms),
            "converged": bool(self.converged),
        }

    def save(self, ply_path, json_path, points: np.ndarray | None = None) -> None:
        """Write the labelled PLY and its JSON sidecar."""
        from .io import write_ply

        pts = points if points is not None else self.aligned.points
        write_ply(ply_path, pts, labels=self.labels)
        Path(json_path).write_text(json.dumps(self.sidecar(), indent=2) + "\n")


def select_seed(candidates: PointCloud, fraction: float) -> PointCloud:
    """The ceil(fraction * n) lowest points (smallest y), in input order.

    Ties at the cut are resolved in favour of earlier points.
    """
    if len(candidates) == 0:
        raise EmptyCloud("no seed candidates")
    if candidates.frame is not Frame.IMU_ALIGNED:
        raise FrameMismatch("seed selection needs an IMU-aligned cloud")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    n = len(candidates)
    m = min(n, math.ceil(fraction * n))
    y = candidates.points[:, 1]
    if m == n:
        return candidates.subset(np.arange(n))
    cut = np.partition(y, m - 1)[m - 1]
    keep = y < cut
    ties = np.flatnonzero(y == cut)[: m - int(keep.sum())]
    keep[ties] = True
    return candidates.subset(keep)


def fit_plane_pca(points) -> PlaneModel:
    """Least-squares plane through the points (total least squares).

    The normal is the right singular vector of the centred point matrix with
    the smallest singular value.
    """
    pts = points.points if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64)
    if pts.shape[0] < 3:
        raise DegenerateGeometry(f"need at least 3 points, got {pts.shape[0]}")
    centroid = pts.sum(axis=0) / pts.shape[0]
    centred = pts - centroid
    # QR first keeps SVD accuracy at the cost of a 3x3 decomposition.
    r = np.linalg.qr(centred, mode="r")
    _, sv, vt = np.linalg.svd(r)
    if sv[0] == 0.0 or sv[1] <= DEGENERACY_RATIO * sv[0]:
        raise DegenerateGeometry("points are collinear or coincident")
    n = vt[2]
    return PlaneModel.from_coefficients(n[0], n[1], n[2], -float(n @ centroid))


def ransac_refine(
    candidates: PointCloud, params: RansacParams, seed: PointCloud | None = None
) -> RansacFit:
    """Alternate PCA fits and inlier selection until the estimate settles.

    The first fit uses the seed (by default the lowest ``seed_fraction`` of
    the candidates). Each later step refits on the current inliers and stops
    when the inlier set repeats, when the plane moves less than the
    convergence tolerances, or after ``max_iterations`` refits.
    """
    if len(candidates) == 0:
        raise EmptyCloud("no RANSAC candidates")
    if seed is None:
        seed = select_seed(candidates, params.seed_fraction)
    pts = candidates.points
    thr = params.inlier_threshold

    plane = fit_plane_pca(seed)
    mask = np.abs(plane.distances(pts)) <= thr
    counts = [int(mask.sum())]
    converged = False
    iterations = 0
    for it in range(1, int(params.max_iterations) + 1):
        new_plane = fit_plane_pca(pts[mask])
        new_mask = np.abs(new_plane.distances(pts)) <= thr
        counts.append(int(new_mask.sum()))
        iterations = it
        same_set = np.array_equal(new_mask, mask)
        small_step = (
            abs(new_plane.offset - plane.offset) <= params.convergence_offset
            and new_plane.angle_to(plane) <= params.convergence_angle
        )
        plane, mask = new_plane, new_mask
        if same_set or small_step:
            converged = True
            break
    return RansacFit(plane, converged, iterations, mask, tuple(counts))


def classify_points(raw: PointCloud, plane: PlaneModel, threshold: float) -> np.ndarray:
    """Per-point :class:`Label`: ground iff ``|distance| <= threshold``."""
    d = plane.distances(raw.points)
    return np.where(np.abs(d) <= threshold, Label.GROUND, Label.OBSTACLE).astype(np.uint8)


def segment_ground(
    raw: PointCloud, att: ImuAttitude, config: SegmentationConfig | None = None
) -> SegmentationResult:
    """Full pipeline: align, voxel filter, radius filter, seed, refine, label.

    Labels refer to the full-resolution input cloud, in input order.
    """
    config = config or SegmentationConfig()
    if len(raw) == 0:
        raise EmptyCloud("input cloud is empty")
    timings = {}
    clock = time.perf_counter
    t0 = t = clock()

    aligned = rotate_attitude(raw, att)
    timings["align"], t = (clock() - t) * 1e3, clock()
    down = voxel_grid_downsample(aligned, config.voxel)
    timings["voxel"], t = (clock() - t) * 1e3, clock()
    cands = radius_outlier_removal(down, config.radius)
    timings["radius"], t = (clock() - t) * 1e3, clock()
    if len(cands) == 0:
        raise AllPointsFiltered("radius outlier removal rejected every point")
    seed = select_seed(cands, config.ransac.seed_fraction)
    timings["seed"], t = (clock() - t) * 1e3, clock()
    fit = ransac_refine(cands, config.ransac, seed=seed)
    timings["ransac"], t = (clock() - t) * 1e3, clock()
    labels = classify_points(aligned, fit.plane, config.classify_threshold)
    timings["classify"] = (clock() - t) * 1e3
    timings["total"] = (clock() - t0) * 1e3
    return SegmentationResult(fit.plane, labels, timings, fit.converged, fit.iterations, aligned)


def warm_up() -> None:
    """Run the pipeline once on a tiny cloud so compiled kernels are loaded
    before anything is timed."""
    g = np.linspace(-0.5, 0.5, 12)
    x, z = np.meshgrid(g, g)
    pts = np.column_stack([x.ravel(), np.zeros(x.size), z.ravel() + 2.0])
    segment_ground(PointCloud(pts), ImuAttitude())
