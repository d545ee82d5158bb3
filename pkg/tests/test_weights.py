"""LTW1 container: layout, round trips and error codes."""

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from pointtrack.params import init_weights, manifest
from pointtrack.refiner import RefinerConfig, refiner_manifest
from pointtrack.weights import (
    BadMagicError,
    DuplicateNameError,
    MissingWeightError,
    ShapeMismatchError,
    TruncatedError,
    WeightsContainer,
    WeightsError,
    load_weights,
    save_weights,
)


def same_bits(a, b):
    return a.shape == b.shape and np.array_equal(a.view(np.uint32), b.view(np.uint32))


class TestLayout:
    def test_hand_encoded_bytes(self):
        w = WeightsContainer({"ab": np.array([[1.0, -2.0]], np.float32)})
        want = (
            b"LTW1" + struct.pack("<I", 1)
            + struct.pack("<I", 2) + b"ab"
            + struct.pack("<I", 2) + struct.pack("<II", 1, 2)
            + struct.pack("<ff", 1.0, -2.0)
        )
        assert w.to_bytes() == want

    def test_scalar_and_utf8_names(self):
        w = WeightsContainer({"ü.scalar": np.float32(3.5)})
        back = WeightsContainer.from_bytes(w.to_bytes())
        assert back["ü.scalar"].shape == ()
        assert back["ü.scalar"] == 3.5


class TestRoundTrip:
    def test_file_round_trip_bit_exact(self, tmp_path, weights_s):
        path = tmp_path / "w.ltw"
        save_weights(weights_s, path)
        back = load_weights(path, manifest("S"))
        assert list(back) == list(weights_s)
        assert all(same_bits(weights_s[k], back[k]) for k in weights_s)

    @settings(max_examples=30, deadline=None)
    @given(hnp.arrays(np.float32, hnp.array_shapes(min_dims=0, max_dims=3, max_side=4),
                      elements=st.floats(width=32, allow_nan=True, allow_infinity=True)))
    def test_arbitrary_values_bit_exact(self, arr):
        back = WeightsContainer.from_bytes(WeightsContainer({"x": arr}).to_bytes())
        assert same_bits(np.array(arr), back["x"])

    def test_read_only(self, weights_s):
        with pytest.raises(ValueError):
            weights_s["refiner.head.bias"][0] = 1.0


class TestErrors:
    def test_bad_magic(self):
        with pytest.raises(BadMagicError) as e:
            WeightsContainer.from_bytes(b"NOPE" + b"\0" * 8)
        assert e.value.code == 11

    def test_truncated_everywhere(self):
        buf = WeightsContainer({"a": np.ones((2, 3)), "b": np.zeros(4)}).to_bytes()
        for cut in range(4, len(buf)):
            with pytest.raises(TruncatedError):
                WeightsContainer.from_bytes(buf[:cut])

    def test_trailing_bytes_rejected(self):
        buf = WeightsContainer({"a": np.ones(2)}).to_bytes()
        with pytest.raises(WeightsError):
            WeightsContainer.from_bytes(buf + b"\0")

    def test_duplicate_name(self):
        one = WeightsContainer({"a": np.ones(1)}).to_bytes()
        body = one[8:]
        with pytest.raises(DuplicateNameError) as e:
            WeightsContainer.from_bytes(b"LTW1" + struct.pack("<I", 2) + body + body)
        assert e.value.code == 14

    def test_shape_mismatch_against_manifest(self, tmp_path):
        # a Small refiner (hidden 256) cannot load as Base (hidden 384)
        path = tmp_path / "s.ltw"
        save_weights(init_weights("S"), path)
        with pytest.raises(WeightsError):
            load_weights(path, manifest("B"))

    def test_base_hidden_384_enforced(self, weights_b):
        wrong = weights_b.replace({"refiner.block0.attn.wq": np.zeros((256, 256), np.float32)})
        with pytest.raises(ShapeMismatchError) as e:
            wrong.check_manifest(manifest("B"))
        assert e.value.code == 13
        assert manifest("B")["refiner.block0.attn.wq"] == (384, 384)

    def test_missing_key_named(self, weights_b):
        with pytest.raises(MissingWeightError, match="backbone.block9.weight"):
            weights_b["backbone.block9.weight"]

    def test_error_codes_distinct(self):
        codes = [c.code for c in (BadMagicError, TruncatedError, ShapeMismatchError, DuplicateNameError, MissingWeightError)]
        assert len(set(codes)) == len(codes)


class TestInitWeights:
    def test_seeded_reproducible(self):
        a, b = init_weights("S", 7), init_weights("S", 7)
        assert a.to_bytes() == b.to_bytes()
        assert init_weights("S", 8).to_bytes() != a.to_bytes()

    def test_head_zero(self, weights_b):
        assert not weights_b["refiner.head.weight"].any()
        assert not weights_b["refiner.head.bias"].any()

    def test_fan_in_bound(self, weights_b):
        w = weights_b["refiner.block1.mlp.fc1.weight"]
        assert np.abs(w).max() <= 1 / np.sqrt(384)

    def test_manifest_complete(self, weights_b):
        weights_b.check_manifest(manifest("B"))
        assert {k: v.shape for k, v in weights_b.items()} == manifest("B")

    def test_small_refiner_parameter_count(self, weights_s):
        # hidden 256, MLP 1024, token width 853:
        #   input 853*256 + 256                          = 218624
        #   per block: 2 LN (2*512) + attn 4*(256*256+256)
        #              + fc1 256*1024+1024 + fc2 1024*256+256 = 789760, x3 = 2369280
        #   final LN 512, head 256*3 + 3 = 771
        hand_total = 218624 + 2369280 + 512 + 771
        assert hand_total == 2_589_187
        assert weights_s.num_parameters("refiner.") == hand_total
        assert sum(int(np.prod(s)) for s in refiner_manifest(RefinerConfig.for_variant("S")).values()) == hand_total
