"""Combo loss (balanced BCE plus Dice) with its analytic gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch


@dataclass(frozen=True)
class ComboLossParams:
    alpha: float = 0.5
    beta: float = 0.5
    smooth: float = 1.0
    clamp_eps: float = 1e-7

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must be in (0, 1)")
        if not self.smooth > 0:
            raise ValueError("smooth must be positive")
        if not 0.0 < self.clamp_eps < 0.5:
            raise ValueError("clamp_eps must be in (0, 0.5)")


def combo_loss(p, g, params: ComboLossParams | None = None):
    """Return ``(loss, dloss/dp)`` for probabilities ``p`` and binary truth ``g``.

    ``loss = alpha * bce + (1 - alpha) * (1 - dice)`` where ``bce`` is the
    class-balanced cross-entropy averaged over pixels.  ``p`` is clamped to
    ``[eps, 1 - eps]`` first; the gradient is zero where clamping was active.
    """
    params = params or ComboLossParams()
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if p.shape != g.shape:
        raise ShapeMismatch(f"prediction {p.shape} and truth {g.shape} differ")
    a, b, s, eps = params.alpha, params.beta, params.smooth, params.clamp_eps
    pc = np.clip(p, eps, 1.0 - eps)
    n = p.size

    bce = -(b * g * np.log(pc) + (1.0 - b) * (1.0 - g) * np.log1p(-pc)).sum() / n
    inter = (pc * g).sum()
    denom = pc.sum() + g.sum() + s
    dice = (2.0 * inter + s) / denom
    loss = a * bce + (1.0 - a) * (1.0 - dice)

    d_bce = -(b * g / pc - (1.0 - b) * (1.0 - g) / (1.0 - pc)) / n
    d_dice = (2.0 * g * denom - (2.0 * inter + s)) / (denom * denom)
    grad = a * d_bce - (1.0 - a) * d_dice
    grad[(p < eps) | (p > 1.0 - eps)] = 0.0
    return float(loss), grad


def bce_dice_terms(p, g, params: ComboLossParams | None = None):
    """The two loss components ``(bce, 1 - dice)`` separately."""
    params = params or ComboLossParams()
    pc = np.clip(np.asarray(p, dtype=np.float64), params.clamp_eps, 1.0 - params.clamp_eps)
    g = np.asarray(g, dtype=np.float64)
    b = params.beta
    bce = -(b * g * np.log(pc) + (1.0 - b) * (1.0 - g) * np.log1p(-pc)).mean()
    dice = (2.0 * (pc * g).sum() + params.smooth) / (pc.sum() + g.sum() + params.smooth)
    return float(bce), float(1.0 - dice)
