import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from udcsim.errors import DimensionError, DomainError, ImageIoError, ImageTypeError
from udcsim.raw import (
    BayerRaw,
    ChannelStack,
    RgbImage,
    load_image,
    load_raw,
    load_rgb,
    merge_bayer,
    quantize,
    save_image,
    sidecar_path,
    split_bayer,
)

from conftest import random_raw


class TestBayerRawInvariants:
    def test_odd_dimensions_rejected(self):
        with pytest.raises(DimensionError):
            BayerRaw(np.zeros((3, 4), dtype=np.uint16))
        with pytest.raises(DimensionError):
            BayerRaw(np.zeros((4, 5), dtype=np.uint16))

    def test_samples_above_white_level_rejected(self):
        samples = np.full((2, 2), 1001, dtype=np.uint16)
        with pytest.raises(DomainError):
            BayerRaw(samples, white_level=1000)

    def test_non_rggb_rejected(self):
        with pytest.raises(DomainError):
            BayerRaw(np.zeros((2, 2), dtype=np.uint16), cfa="BGGR")

    def test_samples_frozen(self):
        raw = BayerRaw(np.zeros((2, 2), dtype=np.uint16))
        with pytest.raises(ValueError):
            raw.samples[0, 0] = 1


class TestSplitBayer:
    def test_2x2_definition(self):
        raw = BayerRaw(np.array([[10, 20], [30, 40]], dtype=np.uint16))
        stack = split_bayer(raw)
        assert stack.r[0, 0] == 10 / 65535
        assert stack.g1[0, 0] == 20 / 65535
        assert stack.g2[0, 0] == 30 / 65535
        assert stack.b[0, 0] == 40 / 65535

    def test_constant_white_gives_ones(self):
        raw = BayerRaw(np.full((4, 4), 4095, dtype=np.uint16), white_level=4095)
        stack = split_bayer(raw)
        for plane in stack.planes().values():
            assert np.all(plane == 1.0)

    def test_plane_shapes(self, rng):
        raw = random_raw(rng, 10, 6)
        stack = split_bayer(raw)
        assert stack.shape == (5, 3)


class TestMergeBayer:
    def test_unit_planes_give_white(self):
        ones = np.ones((1, 1))
        raw = merge_bayer(ChannelStack(ones, ones, ones, ones), white_level=65535)
        assert np.all(raw.samples == 65535)

    def test_round_half_up(self):
        # 0.5 * 65535 = 32767.5 rounds up, never to even
        half = np.full((1, 1), 0.5)
        raw = merge_bayer(ChannelStack(half, half, half, half), white_level=65535)
        assert np.all(raw.samples == 32768)

    def test_out_of_range_clamped(self):
        high = np.full((1, 1), 1.5)
        low = np.full((1, 1), -0.5)
        raw = merge_bayer(ChannelStack(high, low, high, low), white_level=1000)
        assert raw.samples[0, 0] == 1000
        assert raw.samples[0, 1] == 0

    def test_mismatched_plane_sizes_rejected(self):
        with pytest.raises(DimensionError):
            ChannelStack(np.ones((2, 2)), np.ones((2, 2)), np.ones((2, 2)), np.ones((2, 3)))


@given(
    samples=arrays(
        np.uint16,
        st.tuples(
            st.integers(1, 8).map(lambda n: 2 * n),
            st.integers(1, 8).map(lambda n: 2 * n),
        ),
        elements=st.integers(0, 65535),
    )
)
@settings(deadline=None, max_examples=50)
def test_split_merge_roundtrip_bit_exact(samples):
    raw = BayerRaw(samples)
    back = merge_bayer(split_bayer(raw), white_level=raw.white_level)
    assert np.array_equal(back.samples, raw.samples)


@pytest.mark.parametrize("white_level", [255, 1023, 4095, 65535])
def test_split_merge_roundtrip_any_white_level(rng, white_level):
    samples = rng.integers(0, white_level + 1, size=(12, 10), dtype=np.uint16)
    raw = BayerRaw(samples, white_level=white_level)
    back = merge_bayer(split_bayer(raw), white_level=white_level)
    assert np.array_equal(back.samples, raw.samples)


def test_merge_split_roundtrip_on_quantized_stack(rng):
    raw = random_raw(rng, 8, 8)
    stack = split_bayer(raw)
    again = split_bayer(merge_bayer(stack, white_level=raw.white_level))
    for name, plane in stack.items():
        assert np.array_equal(plane, again.planes()[name])


def test_quantize_rounding_rule():
    values = np.array([0.0, 0.4999999 / 255, 0.5 / 255, 1.49 / 255, 2.5 / 255])
    assert list(quantize(values, 255)) == [0, 0, 1, 1, 3]


class TestFileIo:
    def test_raw_roundtrip_lossless(self, rng, tmp_path):
        raw = random_raw(rng, 16, 12, white_level=60000)
        path = tmp_path / "frame.png"
        save_image(path, raw)
        assert sidecar_path(path).is_file()
        loaded = load_raw(path)
        assert loaded.white_level == 60000
        assert np.array_equal(loaded.samples, raw.samples)

    def test_rgb_roundtrip_lossless(self, rng, tmp_path):
        quantized = rng.integers(0, 256, size=(10, 14, 3)) / 255.0
        image = RgbImage(quantized)
        path = tmp_path / "render.png"
        save_image(path, image)
        loaded = load_rgb(path)
        assert np.array_equal(loaded.channels, image.channels)

    def test_load_rgb_as_raw_is_type_error(self, tmp_path):
        path = tmp_path / "render.png"
        save_image(path, RgbImage(np.zeros((4, 4, 3))))
        with pytest.raises(ImageTypeError):
            load_raw(path)

    def test_load_raw_as_rgb_is_type_error(self, rng, tmp_path):
        path = tmp_path / "frame.png"
        save_image(path, random_raw(rng))
        with pytest.raises(ImageTypeError):
            load_rgb(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ImageIoError, match="no such file"):
            load_image(tmp_path / "absent.png")

    def test_truncated_file(self, rng, tmp_path):
        path = tmp_path / "frame.png"
        save_image(path, random_raw(rng, 32, 32))
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(ImageIoError):
            load_image(path)

    def test_unsupported_bit_depth(self, tmp_path):
        from PIL import Image

        path = tmp_path / "gray8.png"
        Image.fromarray(np.zeros((4, 4), dtype=np.uint8), mode="L").save(path)
        with pytest.raises(ImageIoError, match="unsupported"):
            load_image(path)

    def test_sidecar_white_level_respected(self, tmp_path):
        raw = BayerRaw(np.full((4, 4), 900, dtype=np.uint16), white_level=1000)
        path = tmp_path / "frame.png"
        save_image(path, raw)
        loaded = load_raw(path)
        assert loaded.white_level == 1000
        assert np.allclose(split_bayer(loaded).r, 0.9)
