"""Perlin-partition texture collages and (query, reference, truth) triples."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InsufficientBank, PartitionViolation, ShapeMismatch
from .interp import resize_image
from .io import read_ppm, write_pgm, write_ppm
from .perlin import MASK64, PerlinParams, mix64, perlin_field, sub_seed

SIZE = 256
MAX_CLASSES = 5


def partition_labels(k: int, w: int, h: int, params: PerlinParams | None = None, seed: int = 0) -> np.ndarray:
    """(h, w) class index of every pixel: argmax over k seeded noise fields.

    Ties go to the lowest class index.
    """
    if not 1 <= k <= MAX_CLASSES:
        raise ValueError(f"k must be in 1..{MAX_CLASSES}, got {k}")
    if k == 1:
        return np.zeros((h, w), dtype=np.uint8)
    fields = np.stack([perlin_field(w, h, params, sub_seed(seed, c)) for c in range(k)])
    return np.argmax(fields, axis=0).astype(np.uint8)


def partition_masks(k: int, w: int, h: int, params: PerlinParams | None = None, seed: int = 0) -> np.ndarray:
    """k disjoint binary masks covering the image, shape (k, h, w) uint8."""
    labels = partition_labels(k, w, h, params, seed)
    return (labels[None] == np.arange(k, dtype=np.uint8)[:, None, None]).astype(np.uint8)


def check_partition(masks: np.ndarray) -> None:
    masks = np.asarray(masks)
    if masks.ndim != 3:
        raise ShapeMismatch(f"masks must be (k, h, w), got {masks.shape}")
    if not np.isin(masks, (0, 1)).all():
        raise PartitionViolation("masks must be binary")
    cover = masks.sum(axis=0, dtype=np.int64)
    if (cover == 0).any():
        raise PartitionViolation(f"{int((cover == 0).sum())} pixels belong to no mask")
    if (cover > 1).any():
        raise PartitionViolation(f"{int((cover > 1).sum())} pixels belong to several masks")


def compose_collage(textures, masks) -> np.ndarray:
    """Every output pixel is taken from the texture whose mask owns it."""
    masks = np.asarray(masks)
    tex = np.asarray(textures)
    if tex.ndim != 4 or tex.shape[-1] != 3:
        raise ShapeMismatch(f"textures must be (k, h, w, 3), got {tex.shape}")
    if masks.shape != tex.shape[:3]:
        raise ShapeMismatch(f"masks {masks.shape} do not match textures {tex.shape}")
    check_partition(masks)
    owner = np.argmax(masks, axis=0)
    return np.take_along_axis(tex, owner[None, :, :, None], axis=0)[0]


class TextureBank:
    """Class name -> list of RGB images; resized copies are cached."""

    def __init__(self, classes: dict, size: int = SIZE):
        self._images = {str(c): [np.asarray(im, dtype=np.uint8) for im in ims] for c, ims in classes.items()}
        self.names = sorted(self._images)
        self.size = size
        self._cache = {}
        for name in self.names:
            for im in self._images[name]:
                if im.ndim != 3 or im.shape[2] != 3:
                    raise ShapeMismatch(f"class {name}: images must be (h, w, 3)")

    @classmethod
    def from_directory(cls, root, size: int = SIZE) -> "TextureBank":
        """One sub-directory per class holding ``*.ppm`` images."""
        root = Path(root)
        classes = {}
        for sub in sorted(p for p in root.iterdir() if p.is_dir()):
            files = sorted(sub.glob("*.ppm"))
            if files:
                classes[sub.name] = [read_ppm(f) for f in files]
        return cls(classes, size)

    def count(self, name: str) -> int:
        return len(self._images[name])

    def image(self, name: str, index: int) -> np.ndarray:
        key = (name, index)
        if key not in self._cache:
            self._cache[key] = resize_image(self._images[name][index], self.size, self.size)
        return self._cache[key]

    def digest(self) -> str:
        h = hashlib.sha256()
        for name in self.names:
            h.update(name.encode())
            for im in self._images[name]:
                h.update(repr(im.shape).encode())
                h.update(np.ascontiguousarray(im).tobytes())
        return h.hexdigest()


@dataclass
class Triple:
    query: np.ndarray
    reference: np.ndarray
    truth: np.ndarray
    target_class_index: int  # position of the target within `classes`
    seed: int
    classes: list = field(default_factory=list)
    sources: list = field(default_factory=list)  # image index per class used in the query
    reference_source: int = 0
    masks: np.ndarray | None = None
    textures: np.ndarray | None = None

    @property
    def target_class(self) -> str:
        return self.classes[self.target_class_index]

    def manifest(self) -> dict:
        return {
            "seed": self.seed,
            "classes": list(self.classes),
            "target": self.target_class,
            "target_index": self.target_class_index,
            "sources": list(self.sources),
            "reference_source": self.reference_source,
        }


def make_triple(bank: TextureBank, k: int, seed: int, params: PerlinParams | None = None) -> Triple:
    """Sample k classes, compose a collage query and pick one class as target.

    The reference is a different image of the target class whenever the
    class has more than one.  Everything is determined by ``seed``.
    """
    if not 1 <= k <= MAX_CLASSES:
        raise ValueError(f"k must be in 1..{MAX_CLASSES}, got {k}")
    if len(bank.names) < k:
        raise InsufficientBank(f"bank has {len(bank.names)} classes, need {k}")
    seed = int(seed) & MASK64
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(bank.names), size=k, replace=False)
    classes = [bank.names[i] for i in picked]
    sources = [int(rng.integers(bank.count(c))) for c in classes]
    target = int(rng.integers(k))
    tc = classes[target]
    n = bank.count(tc)
    if n > 1:
        ref = int(rng.integers(n - 1))
        ref += ref >= sources[target]
    else:
        ref = sources[target]

    masks = partition_masks(k, bank.size, bank.size, params, mix64(seed))
    textures = np.stack([bank.image(c, s) for c, s in zip(classes, sources)])
    query = compose_collage(textures, masks)
    return Triple(
        query=query,
        reference=bank.image(tc, ref).copy(),
        truth=masks[target].copy(),
        target_class_index=target,
        seed=seed,
        classes=classes,
        sources=sources,
        reference_source=ref,
        masks=masks,
        textures=textures,
    )


def write_triples(bank: TextureBank, out_dir, seed: int, count: int, k: int, params: PerlinParams | None = None) -> dict:
    """Write ``q_NNN.ppm``, ``r_NNN.ppm``, ``g_NNN.pgm`` and ``manifest.json``.

    Triple ``i`` uses the sub-seed derived from (seed, i).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        t = make_triple(bank, k, sub_seed(seed, i), params)
        write_ppm(out / f"q_{i:03d}.ppm", t.query)
        write_ppm(out / f"r_{i:03d}.ppm", t.reference)
        write_pgm(out / f"g_{i:03d}.pgm", t.truth * np.uint8(255))
        entries.append({"index": i, **t.manifest()})
    manifest = {"seed": int(seed), "k": k, "count": count, "bank": bank.digest(), "triples": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
