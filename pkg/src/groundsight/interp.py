"""Bilinear resampling with half-pixel centres (no corner alignment)."""

from __future__ import annotations

import numpy as np


def _axis_weights(n_in: int, n_out: int):
    scale = n_in / n_out
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize_bilinear(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample the last two axes of ``x`` to (out_h, out_w) in float64.

    Source coordinate of output index ``k`` is ``(k + 0.5) * in / out - 0.5``
    clamped to the input range; each output blends its four neighbours.
    """
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape[-2:]
    y0, y1, wy = _axis_weights(h, out_h)
    x0, x1, wx = _axis_weights(w, out_w)
    wy = wy[:, None]
    top = x[..., y0, :]
    bot = x[..., y1, :]
    rows = top * (1.0 - wy) + bot * wy
    return rows[..., x0] * (1.0 - wx) + rows[..., x1] * wx


def resize_image(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of an (h, w, 3) uint8 image, rounded back to uint8."""
    img = np.asarray(img)
    if img.shape[:2] == (out_h, out_w):
        return img.astype(np.uint8, copy=True)
    chw = np.moveaxis(img, -1, 0)
    out = resize_bilinear(chw, out_h, out_w)
    return np.clip(np.rint(np.moveaxis(out, 0, -1)), 0, 255).astype(np.uint8)
