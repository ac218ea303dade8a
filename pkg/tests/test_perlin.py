import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from groundsight.perlin import BOUND, PerlinParams, mix64, octave_seeds, perlin2d, perlin_field, sub_seed


@given(st.integers(-10**6, 10**6), st.integers(-10**6, 10**6), st.integers(0, 2**64 - 1))
def test_zero_on_lattice(x, y, seed):
    assert perlin2d(float(x), float(y), seed) == 0.0


def test_deterministic():
    assert perlin2d(1.37, -4.2, 99) == perlin2d(1.37, -4.2, 99)
    assert perlin2d(1.37, -4.2, 99) != perlin2d(1.37, -4.2, 100)


def test_array_and_scalar_agree(rng):
    x, y = rng.uniform(-20, 20, (2, 500))
    arr = perlin2d(x, y, 5)
    assert arr.shape == (500,)
    for i in range(0, 500, 37):
        assert perlin2d(x[i], y[i], 5) == arr[i]


def test_dense_sampling_bound():
    g = np.arange(0, 8, 1 / 64)
    x, y = np.meshgrid(g, g)
    for seed in range(4):
        v = perlin2d(x, y, seed)
        assert np.abs(v).max() <= 0.7072
        assert np.abs(v).max() >= 0.3


def test_continuity(rng):
    x, y = rng.uniform(0, 10, (2, 1000))
    h = 1e-7
    assert np.abs(perlin2d(x + h, y, 3) - perlin2d(x, y, 3)).max() < 1e-5


def test_single_octave_field_is_plain_noise():
    p = PerlinParams(grid_size=5, octaves=1)
    f = perlin_field(48, 32, p, seed=11)
    i, j = np.mgrid[0:32, 0:48]
    np.testing.assert_array_equal(f, perlin2d(j / 48 * 5, i / 32 * 5, 11))


def test_multi_octave_field_matches_weighted_sum():
    p = PerlinParams(grid_size=3, octaves=4, persistence=0.6, lacunarity=2.5)
    f = perlin_field(40, 30, p, seed=2)
    i, j = np.mgrid[0:30, 0:40]
    seeds = octave_seeds(2, 4)
    acc = np.zeros((30, 40))
    for o in range(4):
        fr = 3 * 2.5**o
        acc += 0.6**o * perlin2d(j / 40 * fr, i / 30 * fr, seeds[o])
    np.testing.assert_allclose(f, acc / sum(0.6**o for o in range(4)), rtol=0, atol=1e-15)


def test_seeds_change_field():
    a = perlin_field(64, 64, seed=1)
    b = perlin_field(64, 64, seed=2)
    assert np.mean(a != b) >= 0.01


@given(st.integers(0, 2**64 - 1), st.integers(1, 6), st.integers(1, 5), st.floats(0.1, 1.0), st.floats(1.0, 3.0))
def test_field_bound(seed, grid, octaves, pers, lac):
    f = perlin_field(33, 17, PerlinParams(grid, octaves, pers, lac), seed)
    assert np.isfinite(f).all()
    assert np.abs(f).max() <= BOUND + 1e-9


@pytest.mark.parametrize(
    "kw", [{"grid_size": 0}, {"octaves": 0}, {"persistence": 0.0}, {"persistence": 1.5}, {"lacunarity": 0.5}]
)
def test_params_validation(kw):
    with pytest.raises(ValueError):
        PerlinParams(**kw)


def test_mix64_reference_values():
    # SplitMix64 outputs for state 0 stepping by the golden gamma
    assert mix64(0) == 0xE220A8397B1DCDAF
    assert mix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4
    assert sub_seed(1, 2) != sub_seed(2, 1)


def test_bound_constant():
    assert BOUND == math.sqrt(2) / 2
