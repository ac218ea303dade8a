"""Central finite-difference check of :func:`combo_loss`'s gradient."""

from __future__ import annotations

import numpy as np

from .loss import ComboLossParams, combo_loss


def numeric_gradient(p: np.ndarray, g: np.ndarray, params: ComboLossParams, h: float = 1e-6) -> np.ndarray:
    grad = np.empty_like(p)
    flat = p.ravel()
    out = grad.ravel()
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up, _ = combo_loss(p, g, params)
        flat[i] = keep - h
        down, _ = combo_loss(p, g, params)
        flat[i] = keep
        out[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Largest element-wise ``|a - n| / max(|a|, |n|)``; entries where both
    are exactly zero count as agreeing."""
    denom = np.maximum(np.abs(analytic), np.abs(numeric))
    diff = np.abs(analytic - numeric)
    ratio = np.divide(diff, denom, out=np.zeros_like(diff), where=denom > 0)
    return float(ratio.max())


def random_instance(rng: np.random.Generator, params: ComboLossParams):
    h, w = rng.integers(2, 9, size=2)
    # keep p away from the clamp so the finite-difference stencil stays smooth
    p = rng.uniform(0.01, 0.99, size=(h, w))
    g = (rng.random((h, w)) < rng.uniform(0.1, 0.9)).astype(np.float64)
    return p, g


def run_gradient_checks(instances: int = 100, seed: int = 0, params: ComboLossParams | None = None,
                        h: float = 1e-6) -> float:
    """Worst relative error over ``instances`` random (p, g) pairs.

    Each instance draws its own alpha and beta unless ``params`` is given.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        prm = params or ComboLossParams(alpha=float(rng.uniform(0, 1)), beta=float(rng.uniform(0.05, 0.95)))
        p, g = random_instance(rng, prm)
        _, analytic = combo_loss(p, g, prm)
        worst = max(worst, relative_error(analytic, numeric_gradient(p.copy(), g, prm, h)))
    return worst
