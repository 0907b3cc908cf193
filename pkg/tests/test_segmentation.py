import numpy as np
import pytest

from sceneparse import _felz_py
from sceneparse import segmentation as sg


def test_constant_image_single_superpixel():
    img = np.full((20, 20, 3), 0.5)
    seg = sg.segment(img, sg.SegmentationParams(sigma=0.8, k_scale=100, min_size=10))
    assert seg.n_superpixels == 1
    assert seg.sizes[0] == 400


def test_two_region_image_splits_at_midline():
    img = np.zeros((20, 20, 3))
    img[:, 10:, :] = 1.0
    seg = sg.segment(img, sg.SegmentationParams(sigma=0.1, k_scale=100, min_size=10))
    assert seg.n_superpixels == 2
    assert set(np.unique(seg.id_map[:, :10])) == {0}
    assert set(np.unique(seg.id_map[:, 10:])) == {1}


def test_partition_and_min_size():
    rng = np.random.default_rng(0)
    params = sg.SegmentationParams(sigma=0.8, k_scale=40, min_size=15)
    for _ in range(3):
        img = rng.random((32, 40, 3))
        seg = sg.segment(img, params)
        assert seg.sizes.sum() == 32 * 40
        assert seg.sizes.min() >= 15
        # ids contiguous
        assert np.array_equal(np.unique(seg.id_map), np.arange(seg.n_superpixels))


def test_determinism():
    rng = np.random.default_rng(1)
    img = rng.random((24, 24, 3))
    params = sg.SegmentationParams(sigma=0.8, k_scale=50, min_size=5)
    a = sg.segment(img, params)
    b = sg.segment(img, params)
    assert np.array_equal(a.id_map, b.id_map)


def test_compiled_and_pure_kernels_identical():
    if sg.BACKEND != "compiled":
        pytest.skip("compiled extension unavailable")
    rng = np.random.default_rng(2)
    for _ in range(5):
        h, w = rng.integers(18, 40, size=2)
        img = rng.random((h, w, 3))
        params = sg.SegmentationParams(sigma=0.8, k_scale=60, min_size=8)
        smoothed = np.empty_like(img)
        from scipy.ndimage import gaussian_filter

        for c in range(3):
            smoothed[:, :, c] = gaussian_filter(img[:, :, c], params.sigma, mode="reflect")
        ea, eb, wt = sg._grid_edges(smoothed * 255.0)
        order = np.argsort(wt, kind="stable")
        args = (
            int(h * w),
            np.ascontiguousarray(ea[order]),
            np.ascontiguousarray(eb[order]),
            np.ascontiguousarray(wt[order]),
            params.effective_k(int(w), int(h)),
            params.min_size,
        )
        fast = sg._kernel.segment_edges(*args)
        slow = _felz_py.segment_edges(*args)
        assert np.array_equal(fast, slow)


def test_effective_k_scaling():
    p = sg.SegmentationParams(k_scale=200.0)
    assert p.effective_k(64, 64) == 200.0  # small images clamp at 1
    assert p.effective_k(2560, 100) == pytest.approx(200.0 * 2.0)


class TestAdjacency:
    def test_three_stripes(self):
        id_map = np.zeros((9, 9), dtype=np.int32)
        id_map[:, 3:6] = 1
        id_map[:, 6:] = 2
        seg = sg.SuperpixelSegmentation(id_map)
        ns = sg.adjacency(seg)
        assert ns == [{1}, {0, 2}, {1}]

    def test_single_superpixel(self):
        seg = sg.SuperpixelSegmentation(np.zeros((5, 5), dtype=np.int32))
        assert sg.adjacency(seg) == [set()]

    def test_matches_bruteforce_pair_scan(self):
        rng = np.random.default_rng(3)
        img = rng.random((24, 20, 3))
        seg = sg.segment(img, sg.SegmentationParams(sigma=0.8, k_scale=30, min_size=5))
        got = sg.adjacency(seg)

        h, w = seg.shape
        oracle = [set() for _ in range(seg.n_superpixels)]
        for y in range(h):
            for x in range(w):
                a = seg.id_map[y, x]
                for dy, dx in ((0, 1), (1, 0), (0, -1), (-1, 0)):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w:
                        b = seg.id_map[yy, xx]
                        if a != b:
                            oracle[a].add(int(b))
        assert got == oracle
        # symmetric, no self-adjacency
        for a, ns in enumerate(got):
            assert a not in ns
            for b in ns:
                assert a in got[b]


class TestBlocks:
    def test_grid_tiles_exactly(self):
        grid = sg.BlockGrid(3, 4, width=25, height=17)
        assert grid.x_bounds.tolist() == [0, 6, 12, 18, 25]
        assert grid.y_bounds.tolist() == [0, 5, 10, 17]
        assert grid.K == 12

    def test_centroid_containment(self):
        grid = sg.BlockGrid(2, 2, width=100, height=100)
        assert grid.block_of(10.0, 10.0) == 0
        # boundary centroid goes to the right-hand half-open block
        assert grid.block_of(50.0, 10.0) == 1
        assert grid.block_of(10.0, 50.0) == 2

    def test_assign_blocks_unique_per_superpixel(self):
        # A region overlapping several blocks lands in exactly the block
        # holding its centroid.
        id_map = np.zeros((20, 20), dtype=np.int32)
        id_map[8:, :] = 1
        id_map[8:, 12:] = 2
        seg = sg.SuperpixelSegmentation(id_map)
        seg = sg.assign_blocks(seg, sg.BlockGrid(2, 2, 20, 20))
        # superpixel 0 spans both top blocks; centroid x=9.5 -> block 0
        assert seg.block_ids[0] == 0
        assert seg.block_ids.shape == (3,)

    def test_block_partition_property(self):
        rng = np.random.default_rng(4)
        img = rng.random((30, 30, 3))
        seg = sg.segment(img, sg.SegmentationParams(sigma=0.8, k_scale=30, min_size=5))
        seg = sg.assign_blocks(seg, sg.BlockGrid(3, 3, 30, 30))
        assert seg.block_ids.min() >= 0 and seg.block_ids.max() < 9
        assert seg.block_ids.shape[0] == seg.n_superpixels

    def test_grid_mismatch_rejected(self):
        seg = sg.SuperpixelSegmentation(np.zeros((5, 5), dtype=np.int32))
        with pytest.raises(ValueError):
            sg.assign_blocks(seg, sg.BlockGrid(2, 2, 6, 5))
