"""One JSON document holding every tunable parameter, grouped by section.

Unknown sections or keys are rejected.  ``--set section.key=value`` style
overrides take JSON values (bare words fall back to strings).
"""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

from .core import CameraIntrinsics
from .errors import ConfigError
from .filtering import RadiusFilterParams, VoxelGridParams
from .mapping import GridConfig
from .masking import MaskingParams
from .mosts.loss import ComboLossParams
from .mosts.model import ToyMostsConfig
from .perlin import PerlinParams
from .plane import RansacParams, SegmentationConfig
from .scenes import SceneSpec


@dataclass(frozen=True)
class SegmentationParams:
    classify_threshold: float = 0.05

    def __post_init__(self):
        if not self.classify_threshold > 0:
            raise ValueError("classify_threshold must be positive")


@dataclass(frozen=True)
class BenchParams:
    count: int = 10
    first_seed: int = 0

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise ValueError("count must be an integer >= 1")


DEFAULT_INTRINSICS = CameraIntrinsics(fx=525.0, fy=525.0, cx=319.5, cy=239.5, width=640, height=480)

SECTIONS = {
    "voxel": VoxelGridParams,
    "radius": RadiusFilterParams,
    "ransac": RansacParams,
    "segmentation": SegmentationParams,
    "masking": MaskingParams,
    "grid": GridConfig,
    "intrinsics": CameraIntrinsics,
    "combo_loss": ComboLossParams,
    "mosts": ToyMostsConfig,
    "perlin": PerlinParams,
    "scene": SceneSpec,
    "bench": BenchParams,
}


def _default(name: str):
    return DEFAULT_INTRINSICS if name == "intrinsics" else SECTIONS[name]()


@dataclass(frozen=True)
class PipelineConfig:
    voxel: VoxelGridParams = field(default_factory=VoxelGridParams)
    radius: RadiusFilterParams = field(default_factory=RadiusFilterParams)
    ransac: RansacParams = field(default_factory=RansacParams)
    segmentation: SegmentationParams = field(default_factory=SegmentationParams)
    masking: MaskingParams = field(default_factory=MaskingParams)
    grid: GridConfig = field(default_factory=GridConfig)
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS
    combo_loss: ComboLossParams = field(default_factory=ComboLossParams)
    mosts: ToyMostsConfig = field(default_factory=ToyMostsConfig)
    perlin: PerlinParams = field(default_factory=PerlinParams)
    scene: SceneSpec = field(default_factory=SceneSpec)
    bench: BenchParams = field(default_factory=BenchParams)

    def segmentation_config(self) -> SegmentationConfig:
        return SegmentationConfig(self.voxel, self.radius, self.ransac, self.segmentation.classify_threshold)

    def to_dict(self) -> dict:
        return {name: _plain(dataclasses.asdict(getattr(self, name))) for name in SECTIONS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(data) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
        parts = {}
        for name, typ in SECTIONS.items():
            section = data.get(name, {})
            if not isinstance(section, dict):
                raise ConfigError(f"section '{name}' must be an object")
            names = {f.name for f in dataclasses.fields(typ)}
            bad = sorted(set(section) - names)
            if bad:
                raise ConfigError(f"unknown key(s) in '{name}': {', '.join(bad)}")
            merged = {**dataclasses.asdict(_default(name)), **section}
            try:
                parts[name] = typ(**merged)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"invalid '{name}' section: {exc}") from None
        return cls(**parts)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(data)

    def with_overrides(self, assignments) -> "PipelineConfig":
        """Apply ``section.key=value`` strings on top of this config."""
        data = self.to_dict()
        for item in assignments or ():
            key, sep, raw = item.partition("=")
            section, dot, name = key.strip().partition(".")
            if not sep or not dot or not name:
                raise ConfigError(f"override {item!r} is not of the form section.key=value")
            if section not in data:
                raise ConfigError(f"unknown config section: {section}")
            if name not in data[section]:
                raise ConfigError(f"unknown key in '{section}': {name}")
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            data[section][name] = value
        return PipelineConfig.from_dict(data)


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, enum.Enum):
        return value.value
    return value
