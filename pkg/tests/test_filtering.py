from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from groundsight.core import PointCloud
from groundsight.errors import EmptyCloud
from groundsight.filtering import (
    KdTree,
    RadiusFilterParams,
    VoxelGridParams,
    build_kdtree,
    member_neighbor_counts,
    radius_count,
    radius_outlier_removal,
    voxel_grid_downsample,
)

DEFAULT = VoxelGridParams()


def voxel_oracle(pts, cell):
    bins = defaultdict(list)
    for p in pts:
        key = tuple(int(np.floor(p[a] / cell[a])) for a in range(3))
        bins[key].append(p)
    out = {}
    for k, members in bins.items():
        acc = np.zeros(3)
        for m in members:  # input order, one at a time
            acc = acc + m
        out[k] = acc / len(members)
    return out


def pair_counts(pts, r):
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    return (d2 <= r * r).sum(1) - 1


def sorted_rows(a):
    a = np.asarray(a)
    return a[np.lexsort(a.T[::-1])]


def test_voxel_single_point():
    out = voxel_grid_downsample(PointCloud(np.array([[0.3, -1.2, 4.0]])), DEFAULT)
    np.testing.assert_array_equal(out.points, [[0.3, -1.2, 4.0]])


def test_voxel_two_points_share_a_cell():
    out = voxel_grid_downsample(PointCloud(np.array([[0.01, 0, 0], [0.02, 0, 0]])), DEFAULT)
    np.testing.assert_allclose(out.points, [[0.015, 0, 0]], atol=1e-15)


def test_voxel_empty():
    with pytest.raises(EmptyCloud):
        voxel_grid_downsample(PointCloud(np.zeros((0, 3))), DEFAULT)


def test_voxel_matches_binning_oracle(rng):
    for _ in range(20):
        pts = rng.uniform(-0.5, 0.5, (200, 3))
        out = voxel_grid_downsample(PointCloud(pts), DEFAULT).points
        ref = voxel_oracle(pts, DEFAULT.cell)
        keys = sorted(ref)
        # output is in lexicographic voxel order
        np.testing.assert_array_equal(out, np.array([ref[k] for k in keys]))


def test_voxel_sparse_fallback_matches_oracle(rng):
    # points far apart force the sort-based path
    pts = np.vstack([rng.uniform(-0.1, 0.1, (50, 3)), rng.uniform(-0.1, 0.1, (50, 3)) + 5000.0])
    out = voxel_grid_downsample(PointCloud(pts), DEFAULT).points
    ref = voxel_oracle(pts, DEFAULT.cell)
    np.testing.assert_allclose(out, np.array([ref[k] for k in sorted(ref)]), rtol=1e-15, atol=0)


@given(arrays(np.float64, (40, 3), elements=st.floats(-3, 3)))
def test_voxel_output_inside_its_voxel(pts):
    cell = DEFAULT.cell
    out = voxel_grid_downsample(PointCloud(pts), DEFAULT).points
    assert len(out) <= len(pts)
    ref = voxel_oracle(pts, cell)
    assert len(out) == len(ref)
    for k, c in zip(sorted(ref), out):
        lo = np.array(k) * cell
        assert np.all(c >= lo - 1e-12) and np.all(c <= lo + cell + 1e-12)


def test_voxel_idempotent_when_every_point_has_own_cell(rng):
    idx = rng.choice(20 * 20 * 20, 300, replace=False)
    cells = np.stack(np.unravel_index(idx, (20, 20, 20)), axis=1)
    pts = (cells + 0.5) * DEFAULT.cell
    out = voxel_grid_downsample(PointCloud(pts), DEFAULT).points
    np.testing.assert_allclose(sorted_rows(out), sorted_rows(pts), atol=1e-15)


def test_anisotropic_cells_thin_walls_more_than_floors():
    s = np.arange(0, 2.0, 0.05)
    a, b = np.meshgrid(s, s)
    wall = np.column_stack([a.ravel(), b.ravel(), np.full(a.size, 3.01)])  # spaced in x and y
    floor = np.column_stack([a.ravel(), np.full(a.size, -0.71), b.ravel()])  # spaced in x and z
    n_wall = len(voxel_grid_downsample(PointCloud(wall), DEFAULT))
    n_floor = len(voxel_grid_downsample(PointCloud(floor), DEFAULT))
    assert len(wall) / n_wall >= 3.0
    assert len(floor) / n_floor < len(wall) / n_wall


def test_radius_isolated_point():
    out = radius_outlier_removal(PointCloud(np.array([[0.0, 0, 0]])), RadiusFilterParams(0.15, 1))
    assert len(out) == 0


def test_radius_cluster_kept(rng):
    pts = rng.normal(scale=0.01, size=(10, 3))
    out = radius_outlier_removal(PointCloud(pts), RadiusFilterParams(0.15, 3))
    np.testing.assert_array_equal(out.points, pts)


def test_radius_matches_quadratic_oracle(rng):
    for _ in range(10):
        pts = rng.uniform(0, 1, (500, 3))
        params = RadiusFilterParams(0.1, 4)
        out = radius_outlier_removal(PointCloud(pts), params).points
        keep = pair_counts(pts, 0.1) >= 4
        np.testing.assert_array_equal(out, pts[keep])


def test_grid_and_tree_counts_agree(rng):
    pts = np.vstack([rng.uniform(0, 2, (400, 3)), rng.uniform(0, 2, (20, 3)).round(1)])
    for r in (0.05, 0.2, 0.7):
        exact = pair_counts(pts, r)
        np.testing.assert_array_equal(member_neighbor_counts(pts, r), exact)
        np.testing.assert_array_equal(KdTree(pts).member_neighbor_counts(r), exact)
        capped = member_neighbor_counts(pts, r, cap=3)
        assert np.all((capped >= 3) == (exact >= 3))


def test_neighbors_on_cell_boundaries():
    # spacing equal to the radius: closed balls must include the neighbor
    pts = np.array([[0.0, 0, 0], [0.15, 0, 0], [0.3, 0, 0], [0.3, 0.15, 0]])
    np.testing.assert_array_equal(member_neighbor_counts(pts, 0.15), pair_counts(pts, 0.15))


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_radius_filter_monotone_in_k(k, seed):
    pts = np.random.default_rng(seed).uniform(0, 1, (150, 3))
    a = radius_outlier_removal(PointCloud(pts), RadiusFilterParams(0.15, k)).points
    b = radius_outlier_removal(PointCloud(pts), RadiusFilterParams(0.15, k + 1)).points
    sa = {tuple(p) for p in a}
    assert all(tuple(p) in sa for p in b)


def test_kdtree_single_point_and_far_query():
    tree = build_kdtree(PointCloud(np.array([[1.0, 2.0, 3.0]])))
    assert radius_count(tree, (1.0, 2.0, 3.0), 10.0) == 0
    assert radius_count(tree, (100.0, 0, 0), 1.0) == 0


def test_kdtree_matches_linear_scan(rng):
    pts = rng.uniform(-1, 1, (1000, 3))
    tree = build_kdtree(PointCloud(pts))
    queries = np.vstack([rng.uniform(-1.2, 1.2, (50, 3)), pts[rng.choice(1000, 50, replace=False)]])
    for q in queries:
        r = rng.uniform(0.01, 0.5)
        d = np.sqrt(((pts - q) ** 2).sum(1))
        member = np.any(np.all(pts == q, axis=1))
        assert radius_count(tree, q, r) == int((d <= r).sum()) - int(member)


def test_kdtree_duplicates_and_small_leaves(rng):
    pts = np.repeat(rng.uniform(0, 1, (30, 3)), 4, axis=0)
    tree = KdTree(pts, leaf_size=2)
    np.testing.assert_array_equal(tree.member_neighbor_counts(0.2), pair_counts(pts, 0.2))
    assert tree.points.shape == pts.shape


def test_kdtree_empty():
    with pytest.raises(EmptyCloud):
        build_kdtree(PointCloud(np.zeros((0, 3))))
    with pytest.raises(EmptyCloud):
        radius_outlier_removal(PointCloud(np.zeros((0, 3))), RadiusFilterParams())


@pytest.mark.parametrize("kwargs", [{"cell_x": 0}, {"cell_y": -1}])
def test_voxel_params_validation(kwargs):
    with pytest.raises(ValueError):
        VoxelGridParams(**kwargs)


@pytest.mark.parametrize("kwargs", [{"radius": 0}, {"min_neighbors": 0}, {"min_neighbors": 1.5}])
def test_radius_params_validation(kwargs):
    with pytest.raises(ValueError):
        RadiusFilterParams(**kwargs)
