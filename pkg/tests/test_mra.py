import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sunpatch.core import ImageGrid, ImagePair, RegionMask, crop_centered
from sunpatch.dimension import GraphLengthParams
from sunpatch.errors import DegenerateError, DimensionMismatchError, SunpatchError
from sunpatch.metrics import jtrend
from sunpatch.mra import dimension_by_scale, haar_layers


def test_constant_image():
    stack = haar_layers(ImageGrid(np.full((4, 4), 7.0)), 2)
    assert len(stack.layers) == 3
    np.testing.assert_array_equal(stack.layers[0].values, 0.0)
    np.testing.assert_array_equal(stack.layers[1].values, 0.0)
    np.testing.assert_array_equal(stack.layers[2].values, 7.0)


def test_checkerboard_one_level():
    board = np.where(np.indices((8, 8)).sum(axis=0) % 2 == 0, 1.0, -1.0)
    stack = haar_layers(ImageGrid(board), 1)
    np.testing.assert_array_equal(stack.layers[0].values, board)
    np.testing.assert_array_equal(stack.layers[1].values, 0.0)


def test_two_by_two_block_mean():
    a, b, c, d = 1.0, 4.0, -2.0, 9.0
    stack = haar_layers(ImageGrid(np.array([[a, b], [c, d]])), 1)
    np.testing.assert_allclose(stack.layers[1].values, np.full((2, 2), (a + b + c + d) / 4), rtol=0, atol=1e-15)


def haar_ll(x):
    """One orthonormal 2-D Haar analysis step, approximation subband only, by hand."""
    r, c = x.shape
    ll = np.empty((r // 2, c // 2))
    for i in range(0, r, 2):
        for j in range(0, c, 2):
            ll[i // 2, j // 2] = (x[i, j] + x[i, j + 1] + x[i + 1, j] + x[i + 1, j + 1]) / 2
    return ll


def haar_up(ll):
    """Synthesis from an approximation subband with zero details."""
    return np.kron(ll, np.ones((2, 2))) / 2


def test_matches_hand_haar(rng):
    x = rng.normal(size=(8, 8))
    stack = haar_layers(ImageGrid(x), 2)
    ll1 = haar_ll(x)
    ll2 = haar_ll(ll1)
    approx1 = haar_up(ll1)
    approx2 = haar_up(haar_up(ll2))
    np.testing.assert_allclose(stack.layers[0].values, x - approx1, atol=1e-12)
    np.testing.assert_allclose(stack.layers[1].values, approx1 - approx2, atol=1e-12)
    np.testing.assert_allclose(stack.layers[2].values, approx2, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(rows=st.integers(4, 40), cols=st.integers(4, 40), levels=st.integers(1, 2), seed=st.integers(0, 10**6))
def test_perfect_reconstruction(rows, cols, levels, seed):
    x = np.random.default_rng(seed).normal(scale=50, size=(rows, cols))
    stack = haar_layers(ImageGrid(x), levels)
    assert all(layer.shape == x.shape for layer in stack.layers)
    assert np.max(np.abs(stack.total() - x)) < 1e-9


@settings(max_examples=20, deadline=None)
@given(k=st.integers(1, 4), levels=st.integers(1, 3), seed=st.integers(0, 10**6))
def test_layers_orthogonal(k, levels, seed):
    n = k * 2**levels
    x = np.random.default_rng(seed).normal(size=(n, 2 * n))
    layers = [layer.values for layer in haar_layers(ImageGrid(x), levels).layers]
    for i in range(len(layers)):
        for j in range(i + 1, len(layers)):
            assert abs(np.sum(layers[i] * layers[j])) < 1e-9
    energy = sum(np.sum(layer**2) for layer in layers)
    assert energy == pytest.approx(np.sum(x**2), rel=1e-12)


def test_levels_validation(rng):
    with pytest.raises(SunpatchError):
        haar_layers(ImageGrid(rng.normal(size=(4, 4))), 0)
    with pytest.raises(SunpatchError):
        haar_layers(ImageGrid(rng.normal(size=(4, 4))), 3)
    # allowed when one axis is long enough
    haar_layers(ImageGrid(rng.normal(size=(4, 16))), 3)


def test_by_scale_constant_is_degenerate():
    pair = ImagePair.from_arrays(np.full((32, 32), 3.0), np.full((32, 32), -1.0))
    with pytest.raises(DegenerateError):
        dimension_by_scale([pair], [RegionMask.background((32, 32))], 1, GraphLengthParams(num_runs=1))


def test_by_scale_mask_mismatch(rng):
    pair = ImagePair.from_arrays(rng.normal(size=(32, 32)), rng.normal(size=(32, 32)))
    with pytest.raises(DimensionMismatchError):
        dimension_by_scale([pair], [RegionMask.background((16, 32))], 1)
    with pytest.raises(SunpatchError):
        dimension_by_scale([pair], [], 1)


def test_by_scale_noise_denoises():
    rng = np.random.default_rng(5)
    pair = ImagePair.from_arrays(rng.normal(size=(32, 32)), rng.normal(size=(32, 32)))
    table = dimension_by_scale([pair], [RegionMask.background((32, 32))], 1, GraphLengthParams(num_runs=1))
    knn = {r["scale"]: r["estimate"] for r in table.rows if r["method"] == "knn"}
    assert knn[1] < knn[0]
    assert [g.size for g in table.groups(0)] == [1024, 1024]


def test_by_scale_spot_table_feeds_jtrend(single_spot):
    pair, mask = crop_centered(*single_spot, 32)
    table = dimension_by_scale([pair], [mask], 1, GraphLengthParams(num_runs=1))
    keys = {(r["scale"], r["region"], r["method"], r["threshold"]) for r in table.rows}
    for scale in (0, 1):
        for region in ("background", "penumbra", "umbra"):
            assert (scale, region, "knn", None) in keys
            assert (scale, region, "pca", 0.97) in keys
    for region in (0, 1, 2):
        res = jtrend(table.groups(region))
        assert 0 <= res["p_value"] <= 1


def test_by_scale_pools_coarse_layer(rng):
    pairs = [ImagePair.from_arrays(rng.normal(size=(16, 16)), rng.normal(size=(16, 16))) for _ in range(2)]
    masks = [RegionMask.background((16, 16))] * 2
    table = dimension_by_scale(pairs, masks, 1, GraphLengthParams(num_runs=1), local_neighborhood=64)
    assert table.samples[(0, "background")].size == 512
    assert table.samples[(1, "background")].size == 512
    pca_coarse = [r for r in table.rows if r["scale"] == 1 and r["method"] == "pca"]
    # one pooled estimate, so no spread across images
    assert all(r["spread"] == 0 for r in pca_coarse)
