import numpy as np
import pytest

from sceneparse import descriptors as dd


def _bilinear_oracle(img, out_h, out_w):
    """Per-pixel bilinear formula, looped; independent of the vectorized path."""
    h, w = img.shape[:2]
    out = np.zeros((out_h, out_w) + img.shape[2:])
    for i in range(out_h):
        for j in range(out_w):
            sy = min(max((i + 0.5) * h / out_h - 0.5, 0), h - 1)
            sx = min(max((j + 0.5) * w / out_w - 0.5, 0), w - 1)
            y0, x0 = int(np.floor(sy)), int(np.floor(sx))
            y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
            fy, fx = sy - y0, sx - x0
            out[i, j] = (
                img[y0, x0] * (1 - fy) * (1 - fx)
                + img[y0, x1] * (1 - fy) * fx
                + img[y1, x0] * fy * (1 - fx)
                + img[y1, x1] * fy * fx
            )
    return out


class TestTinyImage:
    def test_constant_preserved(self):
        img = np.full((40, 30, 3), 0.5)
        vec = dd.tiny_image(img)
        assert vec.shape == (768,)
        assert np.allclose(vec, 0.5)

    def test_identity_on_16x16(self):
        rng = np.random.default_rng(0)
        img = rng.random((16, 16, 3))
        assert np.array_equal(dd.tiny_image(img), img.ravel())

    def test_matches_bilinear_oracle_on_ramp(self):
        ramp = np.linspace(0, 1, 48)[None, :, None] * np.ones((32, 48, 3))
        got = dd.tiny_image(ramp)
        want = _bilinear_oracle(ramp, 16, 16).ravel()
        assert np.max(np.abs(got - want)) < 1e-6


class TestRgbHistogram:
    def test_pure_red_single_bin(self):
        img = np.zeros((20, 20, 3))
        img[:, :, 0] = 1.0
        hist = dd.rgb_histogram(img)
        assert hist.sum() == pytest.approx(1.0, abs=1e-9)
        # red=1.0 clamps into the top red bin
        assert hist[7 * 64] == 1.0
        assert np.count_nonzero(hist) == 1

    def test_half_red_half_blue(self):
        img = np.zeros((20, 20, 3))
        img[:, :10, 0] = 1.0
        img[:, 10:, 2] = 1.0
        hist = dd.rgb_histogram(img)
        assert hist[7 * 64] == pytest.approx(0.5)
        assert hist[7] == pytest.approx(0.5)

    def test_matches_bruteforce_binning(self):
        rng = np.random.default_rng(1)
        img = rng.random((17, 23, 3))
        got = dd.rgb_histogram(img)
        oracle = np.zeros(512)
        for row in img.reshape(-1, 3):
            r, g, b = (min(int(v * 8), 7) for v in row)
            oracle[(r * 8 + g) * 8 + b] += 1
        oracle /= oracle.sum()
        assert np.array_equal(got, oracle)


class TestGist:
    def test_constant_image_near_zero(self):
        vec = dd.gist_descriptor(np.full((64, 64, 3), 0.7))
        assert vec.shape == (512,)
        assert np.linalg.norm(vec) < 1e-6

    def test_offset_invariance(self):
        rng = np.random.default_rng(2)
        img = 0.4 + 0.2 * rng.random((64, 64, 3))
        a = dd.gist_descriptor(img)
        b = dd.gist_descriptor(img + 0.1)
        assert np.linalg.norm(a - b) < 1e-6

    def test_vertical_stripes_orientation(self):
        # stripes varying along x put their energy in the o=0 channel
        x = np.arange(64)
        img = np.repeat((0.5 + 0.4 * np.sin(2 * np.pi * x / 8))[None, :], 64, axis=0)
        vec = dd.gist_descriptor(np.repeat(img[:, :, None], 3, axis=2))
        per = vec.reshape(dd.GIST_SCALES, dd.GIST_ORIENTATIONS, 16).sum(axis=(0, 2))
        assert np.argmax(per) == 0


class TestKmeans:
    def test_exact_points_fixed_point(self):
        pts = np.array([[0.0, 0.0], [5.0, 5.0], [9.0, 0.0]])
        data = np.tile(pts, (7, 1))
        centers = dd.kmeans(data, 3, seed=0)
        got = sorted(map(tuple, np.round(centers, 9)))
        assert got == sorted(map(tuple, pts))

    def test_seed_determinism(self):
        rng = np.random.default_rng(3)
        data = rng.random((60, 5))
        a = dd.kmeans(data, 4, seed=42)
        b = dd.kmeans(data, 4, seed=42)
        assert np.array_equal(a, b)

    def test_two_separated_clusters(self):
        rng = np.random.default_rng(4)
        blob1 = rng.random((6, 2)) * 0.1
        blob2 = rng.random((6, 2)) * 0.1 + 10.0
        data = np.concatenate([blob1, blob2])
        centers = dd.kmeans(data, 2, seed=0)
        lo = centers[np.argmin(centers[:, 0])]
        hi = centers[np.argmax(centers[:, 0])]
        # each center inside its cluster's hull (here: bounding box)
        assert np.all(lo >= blob1.min(0)) and np.all(lo <= blob1.max(0))
        assert np.all(hi >= blob2.min(0)) and np.all(hi <= blob2.max(0))

    def test_too_few_points_rejected(self):
        with pytest.raises(ValueError):
            dd.kmeans(np.zeros((3, 2)), 4, seed=0)


class TestCodebookAndPyramid:
    def test_build_codebook_deterministic(self):
        rng = np.random.default_rng(5)
        imgs = [rng.random((40, 40, 3)) for _ in range(3)]
        a = dd.build_codebook(imgs, V=4, seed=9)
        b = dd.build_codebook(imgs, V=4, seed=9)
        assert np.array_equal(a.centers, b.centers)

    def test_codebook_needs_enough_descriptors(self):
        img = np.random.default_rng(6).random((32, 32, 3))
        with pytest.raises(ValueError):
            dd.build_codebook([img], V=100, seed=0)

    def test_pyramid_level_nesting(self):
        rng = np.random.default_rng(7)
        img = rng.random((64, 64, 3))
        cb = dd.build_codebook([img], V=4, seed=0)
        desc, pos = dd.dense_gradient_descriptors(img)
        words = dd.quantize(desc, cb.centers)
        n_desc = desc.shape[0]
        vec = dd.spatial_pyramid_descriptor(img, cb)
        V = 4
        level0 = vec[:V] * n_desc  # un-normalize
        level1 = vec[V : V + 4 * V] * n_desc
        assert np.allclose(level0, level1.reshape(4, V).sum(axis=0))

    def test_pyramid_matches_bruteforce(self):
        rng = np.random.default_rng(8)
        img = rng.random((64, 48, 3))
        cb = dd.build_codebook([img], V=5, seed=1)
        got = dd.spatial_pyramid_descriptor(img, cb)

        desc, pos = dd.dense_gradient_descriptors(img)
        V = 5
        oracle = []
        for n in (1, 2, 4):
            hist = np.zeros((n * n, V))
            for d, (x, y) in zip(desc, pos):
                word = int(np.argmin(((cb.centers - d) ** 2).sum(axis=1)))
                cx = min(int(x * n / 48), n - 1)
                cy = min(int(y * n / 64), n - 1)
                hist[cy * n + cx, word] += 1
            oracle.append(hist.ravel() / hist.sum())
        assert np.allclose(got, np.concatenate(oracle), atol=1e-12)

    def test_single_repeated_descriptor_one_hot(self):
        # constant gradient field -> identical descriptors -> one word
        x = np.linspace(0, 1, 64)
        img = np.repeat((x[None, :] * 0.5 + 0.25)[:, :, None], 3, axis=2) * np.ones((64, 64, 3))
        rng = np.random.default_rng(9)
        cb = dd.Codebook(rng.random((4, 128)))
        vec = dd.spatial_pyramid_descriptor(img, cb)
        for block, n in zip(np.split(vec, [4, 4 + 16]), (1, 2, 4)):
            per_cell = block.reshape(n * n, 4)
            for cell in per_cell:
                if cell.sum() > 0:
                    assert np.count_nonzero(cell) == 1


def test_all_descriptors_deterministic():
    rng = np.random.default_rng(10)
    img = rng.random((48, 48, 3))
    cb = dd.build_codebook([img], V=4, seed=2)
    a = dd.global_features(img, cb)
    b = dd.global_features(img, cb)
    for name in dd.DESCRIPTOR_NAMES:
        assert np.array_equal(a.get(name), b.get(name))
