"""Forward kernels on (C, H, W) float arrays.

Everything is plain numpy in the input dtype (float64 unless the caller
asks for float32); reductions have a fixed order so results are
reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import GroupDivisibility, ShapeMismatch
from ..interp import resize_bilinear

KINDS = ("standard", "depthwise", "pointwise")


@dataclass(frozen=True)
class BatchNorm:
    """Inference-form batch norm: ``(x - mean) / sqrt(var + eps) * scale + shift``."""

    scale: np.ndarray
    shift: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    eps: float = 1e-5

    @classmethod
    def identity(cls, channels: int, dtype=np.float64) -> "BatchNorm":
        return cls(
            np.ones(channels, dtype),
            np.zeros(channels, dtype),
            np.zeros(channels, dtype),
            np.ones(channels, dtype),
        )

    @property
    def channels(self) -> int:
        return self.scale.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if x.shape[0] != self.channels:
            raise ShapeMismatch(f"batch norm over {self.channels} channels got {x.shape[0]}")
        inv = 1.0 / np.sqrt(self.var + self.eps)
        return (x - self.mean[:, None, None]) * inv[:, None, None] * self.scale[:, None, None] + self.shift[
            :, None, None
        ]


@dataclass(frozen=True)
class ConvSpec:
    """One convolution with optional batch norm and ReLU.

    Weight layouts: standard ``(out, in, k, k)``, depthwise ``(C, 1, k, k)``,
    pointwise ``(out, in, 1, 1)``.  Padding is "same" (``k // 2``), so a
    stride of ``s`` gives ``ceil(H / s)`` output rows.
    """

    kind: str
    weight: np.ndarray
    bias: np.ndarray | None = None
    stride: int = 1
    bn: BatchNorm | None = None
    relu: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown conv kind {self.kind!r}")
        w = self.weight
        if w.ndim != 4 or w.shape[2] != w.shape[3] or w.shape[2] not in (1, 3):
            raise ShapeMismatch(f"conv weight must be (out, in, k, k) with k in {{1, 3}}, got {w.shape}")
        if self.kind == "pointwise" and w.shape[2] != 1:
            raise ShapeMismatch("pointwise convs use 1x1 kernels")
        if self.kind == "depthwise" and w.shape[1] != 1:
            raise ShapeMismatch("depthwise weight must be (C, 1, k, k)")
        if self.bias is not None and self.bias.shape != (w.shape[0],):
            raise ShapeMismatch(f"bias shape {self.bias.shape} does not match {w.shape[0]} outputs")
        if self.bn is not None and self.bn.channels != w.shape[0]:
            raise ShapeMismatch("batch norm width does not match conv outputs")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")

    @property
    def kernel(self) -> int:
        return self.weight.shape[2]

    @property
    def in_channels(self) -> int:
        return self.weight.shape[0] if self.kind == "depthwise" else self.weight.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]


def _check_chw(x: np.ndarray, what: str = "input") -> None:
    if x.ndim != 3:
        raise ShapeMismatch(f"{what} must be (C, H, W), got shape {x.shape}")


def conv_forward(x: np.ndarray, spec: ConvSpec) -> np.ndarray:
    _check_chw(x)
    if x.shape[0] != spec.in_channels:
        raise ShapeMismatch(f"conv expects {spec.in_channels} channels, got {x.shape[0]}")
    k = spec.kernel
    s = spec.stride
    w = spec.weight.astype(x.dtype, copy=False)
    if k == 1:
        xs = x[:, ::s, ::s]
        if spec.kind == "depthwise":
            y = xs * w[:, 0, 0, 0][:, None, None]
        else:
            y = np.tensordot(w[:, :, 0, 0], xs, axes=(1, 0))
    else:
        p = k // 2
        xp = np.pad(x, ((0, 0), (p, p), (p, p)))
        win = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::s, ::s]  # (C, H', W', k, k)
        if spec.kind == "depthwise":
            y = np.einsum("chwij,cij->chw", win, w[:, 0])
        else:
            y = np.tensordot(w, win, axes=([1, 2, 3], [0, 3, 4]))
    if spec.bias is not None:
        y = y + spec.bias.astype(x.dtype, copy=False)[:, None, None]
    if spec.bn is not None:
        y = spec.bn(y)
    if spec.relu:
        y = np.maximum(y, 0.0)
    return np.ascontiguousarray(y, dtype=x.dtype)


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    _check_chw(x)
    return x.mean(axis=(1, 2), keepdims=True)


def global_max_pool(x: np.ndarray) -> np.ndarray:
    _check_chw(x)
    return x.max(axis=(1, 2), keepdims=True)


def cosine_similarity_map(r: np.ndarray, fq: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Cosine between the pooled vector ``r`` (C, 1, 1) and every column of ``fq``.

    Norms are floored at ``eps`` so zero vectors give 0 rather than NaN.
    """
    _check_chw(fq, "query features")
    if r.shape != (fq.shape[0], 1, 1):
        raise ShapeMismatch(f"reference must be ({fq.shape[0]}, 1, 1), got {r.shape}")
    rv = r[:, 0, 0]
    dot = np.tensordot(rv, fq, axes=(0, 0))
    rn = max(float(np.sqrt(rv @ rv)), eps)
    qn = np.maximum(np.sqrt((fq * fq).sum(axis=0)), eps)
    return (dot / (rn * qn))[None]


def similarity_mask(fq: np.ndarray, s: np.ndarray) -> np.ndarray:
    _check_chw(fq, "query features")
    if s.ndim != 3 or s.shape[0] != 1 or s.shape[1:] != fq.shape[1:]:
        raise ShapeMismatch(f"similarity map {s.shape} does not fit features {fq.shape}")
    return fq * s


def sigmoid(x):
    x = np.asarray(x)
    out = np.empty_like(x, dtype=np.result_type(x, np.float32))
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(frozen=True)
class ChannelAttention:
    """Shared two-layer MLP (no biases) over avg- and max-pooled descriptors."""

    w1: np.ndarray  # (hidden, C)
    w2: np.ndarray  # (C, hidden)

    def __post_init__(self):
        if self.w1.ndim != 2 or self.w2.ndim != 2 or self.w2.shape != self.w1.shape[::-1]:
            raise ShapeMismatch(f"attention MLP shapes {self.w1.shape} / {self.w2.shape} are inconsistent")

    @property
    def channels(self) -> int:
        return self.w1.shape[1]


def channel_attention(x: np.ndarray, weights: ChannelAttention) -> np.ndarray:
    _check_chw(x)
    if x.shape[0] != weights.channels:
        raise ShapeMismatch(f"attention over {weights.channels} channels got {x.shape[0]}")

    def mlp(v):
        return weights.w2 @ np.maximum(weights.w1 @ v, 0.0)

    avg = global_avg_pool(x)[:, 0, 0]
    mx = global_max_pool(x)[:, 0, 0]
    scale = sigmoid(mlp(avg) + mlp(mx))
    return x * scale[:, None, None]


@dataclass(frozen=True)
class GroupBranch:
    dw: ConvSpec
    pw: ConvSpec
    attention: ChannelAttention


def local_grouping(fq_masked: np.ndarray, fq_raw: np.ndarray, branches) -> np.ndarray:
    """Split both inputs into ``len(branches)`` channel groups, fuse each pair
    with a DW/PW block and channel attention, and sum the group outputs."""
    _check_chw(fq_masked, "masked features")
    if fq_masked.shape != fq_raw.shape:
        raise ShapeMismatch(f"masked {fq_masked.shape} and raw {fq_raw.shape} features differ")
    g = len(branches)
    c = fq_masked.shape[0]
    if g < 1 or c % g:
        raise GroupDivisibility(f"{c} channels cannot be split into {g} groups")
    step = c // g
    out = None
    for i, br in enumerate(branches):
        sl = slice(i * step, (i + 1) * step)
        cat = np.concatenate([fq_masked[sl], fq_raw[sl]], axis=0)
        y = conv_forward(conv_forward(cat, br.dw), br.pw)
        y = channel_attention(y, br.attention)
        out = y if out is None else out + y
    return out


def bilinear_upsample(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    _check_chw(x)
    if out_h < x.shape[1] or out_w < x.shape[2]:
        raise ShapeMismatch(f"cannot upsample {x.shape[1:]} to smaller ({out_h}, {out_w})")
    return resize_bilinear(x, out_h, out_w).astype(x.dtype, copy=False)
