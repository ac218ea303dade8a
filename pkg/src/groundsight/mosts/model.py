"""A scaled-down one-shot texture segmentation network built from the kernels.

Layout: a shared strided encoder (three skip taps plus the deepest map), a
1x1 / 3x3 / 1x1 embedding bottleneck on both branches, cosine attention of
the pooled reference against the query, local grouping, and a decoder of
upsample + skip concat + 1x1 conv blocks ending in a sigmoid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch, WeightShapeMismatch
from .kernels import (
    BatchNorm,
    ChannelAttention,
    ConvSpec,
    GroupBranch,
    bilinear_upsample,
    conv_forward,
    cosine_similarity_map,
    global_avg_pool,
    local_grouping,
    sigmoid,
    similarity_mask,
)


@dataclass(frozen=True)
class ToyMostsConfig:
    encoder_channels: tuple = (8, 16, 32, 64)
    embed_width: int = 32
    decoder_blocks: int = 3
    groups: int = 4
    attention_reduction: int = 4
    in_channels: int = 3
    seed: int = 0
    similarity_eps: float = 1e-8
    dtype: str = "float64"

    def __post_init__(self):
        object.__setattr__(self, "encoder_channels", tuple(int(c) for c in self.encoder_channels))
        if len(self.encoder_channels) < 2 or min(self.encoder_channels) < 1:
            raise ValueError("need at least two positive encoder widths")
        if self.decoder_blocks != len(self.encoder_channels) - 1:
            raise ValueError("decoder_blocks must equal the number of skip taps (encoder stages - 1)")
        if self.embed_width < 1 or self.groups < 1 or self.embed_width % self.groups:
            raise ValueError("embed_width must be a positive multiple of groups")
        if self.attention_reduction < 1:
            raise ValueError("attention_reduction must be >= 1")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be float64 or float32")

    @property
    def total_stride(self) -> int:
        return 2 ** len(self.encoder_channels)

    def decoder_widths(self) -> list:
        # block i upsamples onto skip tap (n-2-i); the last block emits 1 channel
        skips = self.encoder_channels[:-1][::-1]
        return [skips[i] for i in range(len(skips) - 1)] + [1]


def weight_shapes(cfg: ToyMostsConfig) -> dict:
    """Name -> shape of every parameter tensor."""
    shapes = {}

    def conv(name, out, inp, k, bias=True, bn=True):
        shapes[f"{name}.weight"] = (out, inp, k, k)
        if bias:
            shapes[f"{name}.bias"] = (out,)
        if bn:
            for p in ("scale", "shift", "mean", "var"):
                shapes[f"{name}.bn.{p}"] = (out,)

    prev = cfg.in_channels
    for i, c in enumerate(cfg.encoder_channels):
        conv(f"enc{i}", c, prev, 3)
        prev = c
    e = cfg.embed_width
    conv("embed0", e, prev, 1)
    conv("embed1", e, e, 3)
    conv("embed2", e, e, 1)
    step = e // cfg.groups
    hidden = max(1, e // cfg.attention_reduction)
    for gi in range(cfg.groups):
        conv(f"group{gi}.dw", 2 * step, 1, 3, bn=False)
        conv(f"group{gi}.pw", e, 2 * step, 1)
        shapes[f"group{gi}.att.w1"] = (hidden, e)
        shapes[f"group{gi}.att.w2"] = (e, hidden)
    prev = e
    skips = cfg.encoder_channels[:-1][::-1]
    widths = cfg.decoder_widths()
    for b in range(cfg.decoder_blocks):
        last = b == cfg.decoder_blocks - 1
        conv(f"dec{b}", widths[b], prev + skips[b], 1, bn=not last)
        prev = widths[b]
    return shapes


def init_weights(cfg: ToyMostsConfig, seed: int | None = None) -> dict:
    """Uniform fan-in init, ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``; biases
    zero; batch norms at identity."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    dt = np.dtype(cfg.dtype)
    out = {}
    for name, shape in weight_shapes(cfg).items():
        if name.endswith(".bn.scale") or name.endswith(".bn.var"):
            out[name] = np.ones(shape, dt)
        elif ".bn." in name or name.endswith(".bias"):
            out[name] = np.zeros(shape, dt)
        else:
            fan_in = int(np.prod(shape[1:]))
            bound = 1.0 / np.sqrt(fan_in)
            out[name] = rng.uniform(-bound, bound, shape).astype(dt)
    return out


class ToyMosts:
    """Forward-only network bound to a config and a weight dict."""

    def __init__(self, cfg: ToyMostsConfig, weights: dict):
        expected = weight_shapes(cfg)
        missing = sorted(set(expected) - set(weights))
        extra = sorted(set(weights) - set(expected))
        if missing or extra:
            raise WeightShapeMismatch(f"missing {missing[:3]}, unexpected {extra[:3]}")
        for name, shape in expected.items():
            if tuple(np.shape(weights[name])) != shape:
                raise WeightShapeMismatch(f"{name}: expected {shape}, got {np.shape(weights[name])}")
        self.cfg = cfg
        self.dtype = np.dtype(cfg.dtype)
        w = {k: np.asarray(v, dtype=self.dtype) for k, v in weights.items()}
        self.weights = w

        def conv(name, kind="standard", stride=1, relu=True):
            bn = None
            if f"{name}.bn.scale" in w:
                bn = BatchNorm(*(w[f"{name}.bn.{p}"] for p in ("scale", "shift", "mean", "var")))
            return ConvSpec(kind, w[f"{name}.weight"], w.get(f"{name}.bias"), stride, bn, relu)

        self.encoder = [conv(f"enc{i}", stride=2) for i in range(len(cfg.encoder_channels))]
        self.embed = [conv("embed0"), conv("embed1"), conv("embed2")]
        self.groups = [
            GroupBranch(
                conv(f"group{g}.dw", "depthwise", relu=False),
                conv(f"group{g}.pw", "pointwise"),
                ChannelAttention(w[f"group{g}.att.w1"], w[f"group{g}.att.w2"]),
            )
            for g in range(cfg.groups)
        ]
        n = cfg.decoder_blocks
        self.decoder = [conv(f"dec{b}", "pointwise", relu=b < n - 1) for b in range(n)]

    def _prepare(self, img) -> np.ndarray:
        img = np.asarray(img)
        if img.ndim != 3 or img.shape[2] != self.cfg.in_channels:
            raise ShapeMismatch(f"expected (H, W, {self.cfg.in_channels}) image, got {img.shape}")
        s = self.cfg.total_stride
        if img.shape[0] % s or img.shape[1] % s:
            raise ShapeMismatch(f"image sides must be multiples of {s}, got {img.shape[:2]}")
        x = np.moveaxis(img, -1, 0).astype(self.dtype)
        if img.dtype == np.uint8:
            x = x / self.dtype.type(127.5) - self.dtype.type(1.0)
        return np.ascontiguousarray(x)

    def encode(self, img):
        """(skip taps shallow to deep, embedding of the deepest map)."""
        x = self._prepare(img)
        taps = []
        for spec in self.encoder:
            x = conv_forward(x, spec)
            taps.append(x)
        for spec in self.embed:
            x = conv_forward(x, spec)
        return taps[:-1], x

    def reference_vector(self, ref_embedding: np.ndarray) -> np.ndarray:
        return global_avg_pool(ref_embedding)

    def head(self, skips, fq, r, out_hw) -> np.ndarray:
        """Everything after pooling: attention, grouping, decoder, sigmoid.

        The pooled reference is reduced to its direction and stored at single
        precision before use, so any positive rescaling of ``r`` leaves the
        output unchanged bit for bit.
        """
        rv = np.asarray(r, dtype=np.float64)
        norm = np.sqrt(float((rv * rv).sum()))
        if norm > 0:
            rv = rv / norm
        r_unit = rv.astype(np.float32).astype(self.dtype)
        s = cosine_similarity_map(r_unit, fq, self.cfg.similarity_eps).astype(self.dtype, copy=False)
        x = local_grouping(similarity_mask(fq, s), fq, self.groups)
        for spec, skip in zip(self.decoder, skips[::-1]):
            x = bilinear_upsample(x, skip.shape[1], skip.shape[2])
            x = conv_forward(np.concatenate([x, skip], axis=0), spec)
        x = bilinear_upsample(x, *out_hw)
        return sigmoid(x[0])

    def forward(self, query, reference) -> np.ndarray:
        skips, fq = self.encode(query)
        _, fr = self.encode(reference)
        if np.shape(query)[:2] != np.shape(reference)[:2]:
            raise ShapeMismatch("query and reference must have the same size")
        return self.head(skips, fq, self.reference_vector(fr), np.shape(query)[:2])


def mosts_forward(q, r, cfg: ToyMostsConfig | None = None, weights: dict | None = None) -> np.ndarray:
    """Probability map with the spatial size of ``q``."""
    cfg = cfg or ToyMostsConfig()
    weights = weights if weights is not None else init_weights(cfg)
    return ToyMosts(cfg, weights).forward(q, r)
