"""Seeded 2-D gradient (Perlin) noise and fractal fields.

Lattice gradients are unit vectors whose angle comes from a 64-bit hash of
the corner coordinates and the seed, so any point can be evaluated without
a permutation table and results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

MASK64 = (1 << 64) - 1
BOUND = math.sqrt(2.0) / 2.0


def mix64(z: int) -> int:
    """SplitMix64 finaliser on Python ints (used to derive sub-seeds)."""
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def sub_seed(seed: int, index: int) -> int:
    return mix64((int(seed) & MASK64) ^ mix64(int(index) & MASK64))


@njit(cache=True, inline="always")
def _mix(z):
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _gradient(ix, iy, seed):
    h = _mix(_mix(seed ^ np.uint64(ix)) ^ np.uint64(iy))
    theta = np.float64(h >> np.uint64(11)) * (2.0 * math.pi / 9007199254740992.0)
    return math.cos(theta), math.sin(theta)


@njit(cache=True, inline="always")
def _grad_dot(ix, iy, seed, dx, dy):
    gx, gy = _gradient(ix, iy, seed)
    return gx * dx + gy * dy


@njit(cache=True, inline="always")
def _fade(t):
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


@njit(cache=True, inline="always")
def _noise(x, y, seed):
    fx = math.floor(x)
    fy = math.floor(y)
    ix = np.int64(fx)
    iy = np.int64(fy)
    dx = x - fx
    dy = y - fy
    n00 = _grad_dot(ix, iy, seed, dx, dy)
    n10 = _grad_dot(ix + 1, iy, seed, dx - 1.0, dy)
    n01 = _grad_dot(ix, iy + 1, seed, dx, dy - 1.0)
    n11 = _grad_dot(ix + 1, iy + 1, seed, dx - 1.0, dy - 1.0)
    sx = _fade(dx)
    sy = _fade(dy)
    a = n00 + sx * (n10 - n00)
    b = n01 + sx * (n11 - n01)
    return a + sy * (b - a)


@njit(cache=True)
def _noise_many(xs, ys, seed, out):
    for i in range(xs.shape[0]):
        out[i] = _noise(xs[i], ys[i], seed)


@njit(cache=True)
def _fractal(w, h, freqs, amps, seeds, out):
    # Same arithmetic as _noise, with gradients looked up from a per-octave
    # table instead of rehashed at every pixel.
    total = 0.0
    for o in range(freqs.shape[0]):
        total += amps[o]
    for i in range(h):
        for j in range(w):
            out[i, j] = 0.0
    for o in range(freqs.shape[0]):
        f = freqs[o]
        m = np.int64(math.ceil(f)) + 2
        gx = np.empty((m, m))
        gy = np.empty((m, m))
        for a in range(m):
            for b in range(m):
                gx[a, b], gy[a, b] = _gradient(a, b, seeds[o])
        for i in range(h):
            y = i / h * f
            fy = math.floor(y)
            iy = np.int64(fy)
            dy = y - fy
            sy = _fade(dy)
            for j in range(w):
                x = j / w * f
                fx = math.floor(x)
                ix = np.int64(fx)
                dx = x - fx
                n00 = gx[ix, iy] * dx + gy[ix, iy] * dy
                n10 = gx[ix + 1, iy] * (dx - 1.0) + gy[ix + 1, iy] * dy
                n01 = gx[ix, iy + 1] * dx + gy[ix, iy + 1] * (dy - 1.0)
                n11 = gx[ix + 1, iy + 1] * (dx - 1.0) + gy[ix + 1, iy + 1] * (dy - 1.0)
                sx = _fade(dx)
                a = n00 + sx * (n10 - n00)
                b = n01 + sx * (n11 - n01)
                out[i, j] += amps[o] * (a + sy * (b - a))
    for i in range(h):
        for j in range(w):
            out[i, j] /= total


def perlin2d(x, y, seed: int = 0):
    """Gradient noise at (x, y); scalars in, scalar out, arrays broadcast.

    Zero at every integer lattice point and bounded by sqrt(2)/2.
    """
    xb, yb = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    xs = np.ascontiguousarray(xb).ravel()
    ys = np.ascontiguousarray(yb).ravel()
    out = np.empty(xs.shape[0])
    _noise_many(xs, ys, np.uint64(int(seed) & MASK64), out)
    if xb.ndim == 0:
        return float(out[0])
    return out.reshape(xb.shape)


@dataclass(frozen=True)
class PerlinParams:
    grid_size: int = 4
    octaves: int = 3
    persistence: float = 0.5
    lacunarity: float = 2.0

    def __post_init__(self):
        if int(self.grid_size) != self.grid_size or self.grid_size < 1:
            raise ValueError("grid_size must be an integer >= 1")
        if int(self.octaves) != self.octaves or self.octaves < 1:
            raise ValueError("octaves must be an integer >= 1")
        if not 0.0 < self.persistence <= 1.0:
            raise ValueError("persistence must be in (0, 1]")
        if not self.lacunarity >= 1.0:
            raise ValueError("lacunarity must be >= 1")


def octave_seeds(seed: int, octaves: int) -> list:
    # octave 0 uses the seed itself so a one-octave field is plain perlin2d
    return [int(seed) & MASK64] + [sub_seed(seed, o) for o in range(1, octaves)]


def perlin_field(w: int, h: int, params: PerlinParams | None = None, seed: int = 0) -> np.ndarray:
    """(h, w) fractal noise normalised by the total octave amplitude.

    Pixel (i, j) samples ``(j / w, i / h) * grid_size * lacunarity**o`` in
    octave ``o`` with weight ``persistence**o``.
    """
    params = params or PerlinParams()
    if w < 1 or h < 1:
        raise ValueError("field size must be positive")
    n = int(params.octaves)
    freqs = np.array([params.grid_size * params.lacunarity**o for o in range(n)], dtype=np.float64)
    amps = np.array([params.persistence**o for o in range(n)], dtype=np.float64)
    seeds = np.array(octave_seeds(seed, n), dtype=np.uint64)
    out = np.empty((int(h), int(w)))
    _fractal(int(w), int(h), freqs, amps, seeds, out)
    return out
