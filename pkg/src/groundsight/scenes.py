"""Synthetic indoor scenes with exact labels, plus IoU metrics and a batch
benchmark over :func:`groundsight.plane.segment_ground`."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import ImuAttitude, PlaneModel, PointCloud
from .errors import GroundsightError, LengthMismatch
from .plane import Label, SegmentationConfig, segment_ground, warm_up


class Surface(enum.IntEnum):
    FLOOR = 0
    WALL = 1
    BOX_SIDE = 2
    BOX_TOP = 3
    OUTLIER = 4


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of one synthetic scene.

    The floor is a ``floor_size`` square centred on the camera's x axis and
    starting ``floor_near`` metres ahead of it, ``camera_height`` below the
    camera.  ``pitch``/``roll`` of ``None`` draw a tilt uniformly from
    ``[-max_tilt_deg, max_tilt_deg]``; ``box_heights`` overrides the drawn
    box heights.
    """

    floor_size: float = 6.0
    floor_near: float = 0.3
    camera_height: float = 0.7
    wall_count: int = 2
    wall_height: float = 2.0
    box_count: int = 5
    box_size_min: float = 0.02
    box_size_max: float = 0.5
    box_heights: tuple | None = None
    density: float = 5000.0
    max_points: int = 300_000
    noise_sigma: float = 0.003
    outlier_fraction: float = 0.02
    max_tilt_deg: float = 20.0
    pitch: float | None = None
    roll: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.density > 0:
            raise ValueError("density must be positive")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ValueError("outlier_fraction must be in [0, 1)")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not 0 <= self.wall_count <= 4:
            raise ValueError("wall_count must be 0..4")
        if not 0 < self.box_size_min <= self.box_size_max:
            raise ValueError("box size range is invalid")
        if self.box_heights is not None:
            object.__setattr__(self, "box_heights", tuple(float(h) for h in self.box_heights))
            object.__setattr__(self, "box_count", len(self.box_heights))
        if self.max_points < 1 or self.floor_size <= 0 or self.camera_height <= 0:
            raise ValueError("sizes and counts must be positive")


@dataclass
class LabeledScene:
    raw: PointCloud
    labels: np.ndarray
    plane: PlaneModel
    attitude: ImuAttitude
    surface: np.ndarray
    box_index: np.ndarray
    height: np.ndarray  # noise-free height above the floor
    boxes: list = field(default_factory=list)


def _sample_rect(rng, n, origin, u, v):
    a = rng.random(n)
    b = rng.random(n)
    return origin + a[:, None] * u + b[:, None] * v


def synth_scene(spec: SceneSpec) -> LabeledScene:
    """Sample floor, walls and boxes; add noise and outliers; tilt the camera.

    Depth noise is applied along each point's viewing ray.  Returned points
    are in the raw (tilted) camera frame.
    """
    rng = np.random.default_rng(spec.seed)
    tilt = math.radians(spec.max_tilt_deg)
    pitch = spec.pitch if spec.pitch is not None else float(rng.uniform(-tilt, tilt))
    roll = spec.roll if spec.roll is not None else float(rng.uniform(-tilt, tilt))
    att = ImuAttitude(pitch, roll)

    h = spec.camera_height
    half = spec.floor_size / 2
    x0, x1 = -half, half
    z0, z1 = spec.floor_near, spec.floor_near + spec.floor_size
    fy = -h
    H = spec.wall_height

    boxes = _place_boxes(rng, spec, (x0, x1, z0, z1))

    # surfaces: (origin, u, v, surface, box index)
    rects = [(np.array([x0, fy, z0]), np.array([x1 - x0, 0, 0]), np.array([0, 0, z1 - z0]), Surface.FLOOR, -1)]
    walls = [
        (np.array([x0, fy, z1]), np.array([x1 - x0, 0, 0]), np.array([0, H, 0])),
        (np.array([x1, fy, z0]), np.array([0, 0, z1 - z0]), np.array([0, H, 0])),
        (np.array([x0, fy, z0]), np.array([0, 0, z1 - z0]), np.array([0, H, 0])),
        (np.array([x0, fy, z0]), np.array([x1 - x0, 0, 0]), np.array([0, H, 0])),
    ]
    for o, u, v in walls[: spec.wall_count]:
        rects.append((o, u, v, Surface.WALL, -1))
    for i, (bx, bz, w, d, bh) in enumerate(boxes):
        o = np.array([bx, fy, bz])
        ex, ez, ey = np.array([w, 0, 0]), np.array([0, 0, d]), np.array([0, bh, 0])
        rects.append((o + ey, ex, ez, Surface.BOX_TOP, i))
        rects.append((o, ex, ey, Surface.BOX_SIDE, i))
        rects.append((o + ez, ex, ey, Surface.BOX_SIDE, i))
        rects.append((o, ez, ey, Surface.BOX_SIDE, i))
        rects.append((o + ex, ez, ey, Surface.BOX_SIDE, i))

    areas = np.array([np.linalg.norm(np.cross(u, v)) for _, u, v, _, _ in rects])
    floor_free = areas[0] - sum(w * d for _, _, w, d, _ in boxes)
    nominal = floor_free + areas[1:].sum()
    density = spec.density
    budget = spec.max_points * (1.0 - spec.outlier_fraction)
    if nominal * density > budget:
        density = budget / nominal

    chunks, surf, bidx = [], [], []
    for k, (o, u, v, s, bi) in enumerate(rects):
        if s is Surface.FLOOR:
            n = int(round(areas[k] * density))
            pts = _sample_rect(rng, n, o, u, v)
            pts = pts[~_inside_any_box(pts, boxes)]
        else:
            n = int(round(areas[k] * density))
            pts = _sample_rect(rng, n, o, u, v)
        chunks.append(pts)
        surf.append(np.full(len(pts), int(s), dtype=np.uint8))
        bidx.append(np.full(len(pts), bi, dtype=np.int32))
    pts = np.concatenate(chunks)
    height = pts[:, 1] - fy

    if spec.noise_sigma > 0:
        rng_norm = np.linalg.norm(pts, axis=1, keepdims=True)
        pts = pts + pts / rng_norm * rng.normal(0.0, spec.noise_sigma, (len(pts), 1))

    n_out = int(round(len(pts) * spec.outlier_fraction / (1.0 - spec.outlier_fraction)))
    n_out = min(n_out, max(spec.max_points - len(pts), 0))
    if n_out:
        lo = np.array([x0, fy, z0])
        hi = np.array([x1, fy + max(H, 0.5), z1])
        out = lo + rng.random((n_out, 3)) * (hi - lo)
        pts = np.concatenate([pts, out])
        height = np.concatenate([height, out[:, 1] - fy])
        surf.append(np.full(n_out, int(Surface.OUTLIER), dtype=np.uint8))
        bidx.append(np.full(n_out, -1, dtype=np.int32))
    surface = np.concatenate(surf)
    box_index = np.concatenate(bidx)

    order = rng.permutation(len(pts))
    pts, surface, box_index, height = pts[order], surface[order], box_index[order], height[order]
    labels = np.where(surface == Surface.FLOOR, Label.GROUND, Label.OBSTACLE).astype(np.uint8)

    # aligned = R @ raw, so the camera sees R^T @ world
    raw = pts @ att.matrix()
    return LabeledScene(
        raw=PointCloud(raw),
        labels=labels,
        plane=PlaneModel((0.0, 1.0, 0.0), h),
        attitude=att,
        surface=surface,
        box_index=box_index,
        height=height,
        boxes=boxes,
    )


def _place_boxes(rng, spec: SceneSpec, extent):
    x0, x1, z0, z1 = extent
    margin = 0.2
    boxes = []
    for i in range(spec.box_count):
        for _ in range(100):
            w, d = rng.uniform(max(spec.box_size_min, 0.1), max(spec.box_size_max, 0.1), 2)
            if spec.box_heights is not None:
                bh = spec.box_heights[i]
            else:
                bh = rng.uniform(spec.box_size_min, spec.box_size_max)
            bx = rng.uniform(x0 + margin, x1 - margin - w)
            bz = rng.uniform(z0 + margin, z1 - margin - d)
            clear = all(
                bx + w + margin < ox or ox + ow + margin < bx or bz + d + margin < oz or oz + od + margin < bz
                for ox, oz, ow, od, _ in boxes
            )
            if clear:
                boxes.append((float(bx), float(bz), float(w), float(d), float(bh)))
                break
    return boxes


def _inside_any_box(pts, boxes):
    inside = np.zeros(len(pts), dtype=bool)
    for bx, bz, w, d, _ in boxes:
        inside |= (pts[:, 0] >= bx) & (pts[:, 0] <= bx + w) & (pts[:, 2] >= bz) & (pts[:, 2] <= bz + d)
    return inside


# -- metrics -----------------------------------------------------------------

def iou(pred, truth, cls) -> float:
    """Intersection over union of one class; an empty union scores 1.0."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise LengthMismatch(f"{pred.shape} vs {truth.shape}")
    p = pred == cls
    t = truth == cls
    union = np.count_nonzero(p | t)
    if union == 0:
        return 1.0
    return np.count_nonzero(p & t) / union


def miou(pred, truth) -> float:
    return (iou(pred, truth, Label.GROUND) + iou(pred, truth, Label.OBSTACLE)) / 2.0


def boundary_band(scene: LabeledScene, threshold: float, sigma: float) -> np.ndarray:
    """Points whose noise-free height is within ``sigma`` of the decision
    threshold; their labels are ill-defined under noise of that size."""
    if sigma <= 0:
        return np.zeros(len(scene.labels), dtype=bool)
    return np.abs(np.abs(scene.height) - threshold) <= sigma


BENCH_POLICY = (
    "points whose noise-free height lies within one noise sigma of the "
    "classification threshold are excluded from IoU"
)


def evaluate_scene(scene: LabeledScene, spec: SceneSpec, config: SegmentationConfig) -> dict:
    result = segment_ground(scene.raw, scene.attitude, config)
    keep = ~boundary_band(scene, config.classify_threshold, spec.noise_sigma)
    pred, truth = result.labels[keep], scene.labels[keep]
    return {
        "seed": spec.seed,
        "miou": miou(pred, truth),
        "iou_ground": iou(pred, truth, Label.GROUND),
        "normal_err_deg": math.degrees(result.plane.angle_to(scene.plane)),
        "d_err_m": abs(result.plane.offset - scene.plane.offset),
        "timings_ms": result.timings_ms,
        "converged": result.converged,
        "n_points": len(scene.raw),
        "n_excluded": int(np.count_nonzero(~keep)),
    }


def run_benchmark(specs, config: SegmentationConfig | None = None) -> dict:
    """Segment every scene and aggregate accuracy and timing.

    A failing scene is reported with an ``error`` entry instead of metrics.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("run_benchmark needs at least one scene")
    config = config or SegmentationConfig()
    warm_up()
    rows = []
    for spec in specs:
        try:
            rows.append(evaluate_scene(synth_scene(spec), spec, config))
        except GroundsightError as exc:
            rows.append({"seed": spec.seed, "error": f"{type(exc).__name__}: {exc}"})
    ok = [r for r in rows if "error" not in r]
    agg = {"count": len(rows), "failed": len(rows) - len(ok), "policy": BENCH_POLICY}
    for key in ("miou", "iou_ground", "normal_err_deg", "d_err_m"):
        vals = np.array([r[key] for r in ok], dtype=np.float64)
        agg[key] = _stats(vals)
    agg["total_ms"] = _stats(np.array([r["timings_ms"]["total"] for r in ok], dtype=np.float64))
    agg["converged_fraction"] = (sum(r["converged"] for r in ok) / len(ok)) if ok else 0.0
    return {"scenes": rows, "aggregate": agg}


def _stats(vals: np.ndarray) -> dict:
    if vals.size == 0:
        return {"mean": None, "min": None, "max": None}
    return {"mean": float(vals.mean()), "min": float(vals.min()), "max": float(vals.max())}


def default_specs(count: int, first_seed: int = 0, **overrides) -> list:
    return [SceneSpec(seed=first_seed + i, **overrides) for i in range(count)]


def spec_to_dict(spec: SceneSpec) -> dict:
    d = asdict(spec)
    if d["box_heights"] is not None:
        d["box_heights"] = list(d["box_heights"])
    return d
