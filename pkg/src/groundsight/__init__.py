"""Drivable-area perception toolkit: ground-plane segmentation, masking and
mapping, Perlin collage synthesis and small one-shot segmentation kernels."""

from .core import CameraIntrinsics, Frame, ImuAttitude, PlaneModel, PointCloud, rotate_attitude, signed_distance
from .errors import GroundsightError
from .plane import Label, SegmentationConfig, SegmentationResult, segment_ground

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics",
    "Frame",
    "GroundsightError",
    "ImuAttitude",
    "Label",
    "PlaneModel",
    "PointCloud",
    "SegmentationConfig",
    "SegmentationResult",
    "rotate_attitude",
    "segment_ground",
    "signed_distance",
]
