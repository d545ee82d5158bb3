"""Feature pyramids: learned (seeded) and patch-identity."""

import numpy as np
import pytest

from pointtrack.backbone import STRIDES, WIDTHS, Video, extract_pyramid, patch_identity_pyramid
from pointtrack.correlation import QueryPoint, global_correlation
from pointtrack.weights import MissingWeightError


def random_video(rng, T=2, H=32, W=32):
    return Video(rng.random((T, H, W, 3), dtype=np.float32))


class TestVideo:
    def test_rejects_bad_size(self):
        with pytest.raises(ValueError, match="divisible by 8"):
            Video(np.zeros((2, 30, 32, 3)))

    def test_rejects_bad_layout(self):
        with pytest.raises(ValueError):
            Video(np.zeros((2, 32, 32)))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Video(np.zeros((0, 32, 32, 3)))


class TestExtractPyramid:
    def test_shapes(self, rng, weights_s):
        pyr = extract_pyramid(random_video(rng, T=3, H=32, W=48), weights_s)
        assert pyr.strides == STRIDES == (2, 4, 8)
        for feats, s, c in zip(pyr.levels, STRIDES, WIDTHS):
            assert feats.shape == (3, 32 // s, 48 // s, c)

    def test_deterministic(self, rng, weights_s):
        v = random_video(rng)
        a, b = extract_pyramid(v, weights_s), extract_pyramid(v, weights_s)
        for x, y in zip(a.levels, b.levels):
            np.testing.assert_array_equal(x, y)

    def test_frames_independent(self, rng, weights_s):
        v = random_video(rng, T=3)
        whole = extract_pyramid(v, weights_s)
        single = extract_pyramid(Video(v.frames[1:2]), weights_s)
        for x, y in zip(whole.levels, single.levels):
            np.testing.assert_allclose(x[1], y[0], atol=1e-5)

    def test_brightness_scale_invariant(self, rng, weights_s):
        # zero conv biases + instance norm: a global gain on the input cancels
        v = random_video(rng)
        a = extract_pyramid(v, weights_s)
        b = extract_pyramid(Video(v.frames * 0.5), weights_s)
        for x, y in zip(a.levels, b.levels):
            np.testing.assert_allclose(x, y, rtol=5e-3, atol=1e-3)  # eps in the norm breaks exactness

    def test_missing_weight_named(self, rng, weights_s):
        partial = {k: v for k, v in weights_s.items() if k != "backbone.block1.weight"}
        from pointtrack.weights import WeightsContainer

        with pytest.raises(MissingWeightError, match="backbone.block1.weight"):
            extract_pyramid(random_video(rng), WeightsContainer(partial))


class TestPatchIdentity:
    def test_shapes(self, rng):
        pyr = patch_identity_pyramid(random_video(rng, T=2, H=32, W=16))
        for feats, s in zip(pyr.levels, STRIDES):
            assert feats.shape == (2, 32 // s, 16 // s, 3 * s * s)

    def test_cell_holds_its_patch(self, rng):
        v = random_video(rng)
        feats = patch_identity_pyramid(v).levels[1]
        i, j = 3, 5
        patch = v.frames[0, 4 * i - 2:4 * i + 2, 4 * j - 2:4 * j + 2]
        np.testing.assert_array_equal(feats[0, i, j], patch.reshape(-1))

    def test_integer_cell_shift_equivariance(self, rng):
        base = rng.random((1, 40, 40, 3), dtype=np.float32)
        a = patch_identity_pyramid(Video(base[:, :32, :32])).levels[0]
        b = patch_identity_pyramid(Video(base[:, :32, 2:34])).levels[0]
        np.testing.assert_array_equal(a[0, 1:, 2:], b[0, 1:, 1:-1])

    def test_self_similarity_peak(self, rng):
        v = random_video(rng, T=1)
        q = QueryPoint(14.0, 20.0, 0)
        gc = global_correlation(patch_identity_pyramid(v), q)
        level0 = gc[0, :, :, 0]
        assert np.unravel_index(np.argmax(level0), level0.shape) == (10, 7)
        assert level0[10, 7] == pytest.approx(1.0, abs=1e-6)
