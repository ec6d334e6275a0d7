import numpy as np
import pytest

from udcsim.degrade import (
    NoiseParams,
    IntensityScale,
    add_noise,
    apply_gamma,
    convolve_plane,
    convolve_psf,
    sample_noise_params,
    synthesize,
)
from udcsim.errors import DimensionError, DomainError
from udcsim.optics import Psf, PsfSet, delta_psf_set
from udcsim.patterns import constant_raw
from udcsim.raw import BayerRaw, ChannelStack, split_bayer

from conftest import random_raw


def stack_of(plane: np.ndarray) -> ChannelStack:
    return ChannelStack(plane, plane.copy(), plane.copy(), plane.copy())


def psf_set_of(kernel: np.ndarray) -> PsfSet:
    def make(ch):
        return Psf(kernel=kernel, channel=ch)

    return PsfSet(r=make("R"), g1=make("G1"), g2=make("G2"), b=make("B"))


def circular_convolve_oracle(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Direct nested-loop circular convolution with a center-origin kernel."""
    height, width = plane.shape
    kh, kw = kernel.shape
    cy, cx = kh // 2, kw // 2
    out = np.zeros_like(plane)
    for i in range(height):
        for j in range(width):
            acc = 0.0
            for u in range(kh):
                for v in range(kw):
                    acc += kernel[u, v] * plane[(i - (u - cy)) % height, (j - (v - cx)) % width]
            out[i, j] = acc
    return out


class TestApplyGamma:
    def test_unit_gamma_identity(self, rng):
        stack = stack_of(rng.random((4, 4)))
        out = apply_gamma(stack, IntensityScale.uniform(1.0))
        for name, plane in out.items():
            assert np.array_equal(plane, stack.planes()[name])

    def test_low_transmission_values_suppress_blue(self):
        scale = IntensityScale.from_rgb(0.34, 0.34, 0.20)
        stack = stack_of(np.ones((2, 2)))
        out = apply_gamma(stack, scale)
        assert np.allclose(out.r, 0.34)
        assert np.allclose(out.g1, 0.34)
        assert np.allclose(out.g2, 0.34)
        assert np.allclose(out.b, 0.20)
        assert out.b[0, 0] < out.r[0, 0]  # blue suppressed -> yellow shift

    def test_gamma_then_inverse_gamma_identity(self, rng):
        scale = IntensityScale.from_rgb(0.97, 0.97, 0.97)
        inverse = IntensityScale(
            {name: 1.0 / value for name, value in scale.gamma.items()}
        )
        stack = stack_of(rng.random((6, 6)))
        out = apply_gamma(apply_gamma(stack, scale), inverse)
        for name, plane in out.items():
            assert np.allclose(plane, stack.planes()[name], atol=1e-12)

    def test_nonpositive_gamma_rejected(self):
        with pytest.raises(DomainError):
            IntensityScale.uniform(0.0)
        with pytest.raises(DomainError):
            IntensityScale.from_rgb(0.5, -0.1, 0.5)


class TestConvolve:
    def test_delta_kernel_identity(self, rng):
        stack = stack_of(rng.random((8, 8)))
        out = convolve_psf(stack, delta_psf_set())
        for name, plane in out.items():
            assert np.allclose(plane, stack.planes()[name], atol=1e-12)

    def test_matches_spatial_oracle(self, rng):
        plane = rng.random((8, 8))
        kernel = rng.random((3, 3))
        kernel /= kernel.sum()
        result = convolve_plane(plane, kernel)
        oracle = circular_convolve_oracle(plane, kernel)
        assert np.max(np.abs(result - oracle)) < 1e-12

    def test_even_kernel_matches_oracle(self, rng):
        plane = rng.random((8, 10))
        kernel = rng.random((4, 4))
        kernel /= kernel.sum()
        assert np.max(np.abs(convolve_plane(plane, kernel) - circular_convolve_oracle(plane, kernel))) < 1e-12

    def test_constant_plane_preserved_by_normalized_kernel(self, rng):
        kernel = rng.random((5, 5))
        kernel /= kernel.sum()
        plane = np.full((16, 16), 0.37)
        out = convolve_plane(plane, kernel)
        assert np.allclose(out, 0.37, atol=1e-12)

    def test_linearity(self, rng):
        kernel = rng.random((3, 3))
        kernel /= kernel.sum()
        x = rng.random((12, 12))
        z = rng.random((12, 12))
        lhs = convolve_plane(2.5 * x + 0.5 * z, kernel)
        rhs = 2.5 * convolve_plane(x, kernel) + 0.5 * convolve_plane(z, kernel)
        assert np.max(np.abs(lhs - rhs)) < 1e-10

    def test_mean_preserved(self, rng):
        kernel = rng.random((5, 5))
        kernel /= kernel.sum()
        plane = rng.random((16, 16))
        out = convolve_plane(plane, kernel)
        assert abs(out.mean() - plane.mean()) < 1e-10

    def test_kernel_larger_than_plane_rejected(self, rng):
        stack = stack_of(rng.random((4, 4)))
        big = np.full((5, 5), 1.0 / 25.0)
        with pytest.raises(DimensionError):
            convolve_psf(stack, psf_set_of(big))


class TestAddNoise:
    def test_zero_params_identity(self, rng):
        stack = stack_of(rng.random((8, 8)))
        out = add_noise(stack, NoiseParams.zero(), seed=3)
        for name, plane in out.items():
            assert np.array_equal(plane, np.clip(stack.planes()[name], 0.0, 1.0))

    def test_variance_matches_model(self):
        # var = lambda_read + lambda_shot * w = 1e-4 + 1e-2 * 0.25 = 2.6e-3
        plane = np.full((1000, 1000), 0.25)
        stack = ChannelStack(plane, plane, plane, plane)
        noise = NoiseParams.from_scalars(1e-4, 1e-2)
        out = add_noise(stack, noise, seed=42, clip=False)
        observed = np.var(out.g1 - plane)
        assert abs(observed - 2.6e-3) / 2.6e-3 < 0.02

    def test_deterministic_per_seed(self, rng):
        stack = stack_of(rng.random((8, 8)))
        noise = NoiseParams.from_scalars(1e-4, 1e-3)
        a = add_noise(stack, noise, seed=9)
        b = add_noise(stack, noise, seed=9)
        c = add_noise(stack, noise, seed=10)
        assert np.array_equal(a.r, b.r)
        assert not np.array_equal(a.r, c.r)

    def test_channels_use_independent_streams(self):
        plane = np.full((32, 32), 0.5)
        out = add_noise(stack_of(plane), NoiseParams.from_scalars(1e-4, 0), seed=1)
        assert not np.array_equal(out.r, out.g1)
        assert not np.array_equal(out.g1, out.g2)

    def test_negative_input_rejected(self):
        stack = stack_of(np.full((2, 2), -0.1))
        with pytest.raises(DomainError):
            add_noise(stack, NoiseParams.from_scalars(1e-4, 1e-3), seed=0)

    def test_clipping_bounds_output(self):
        plane = np.full((64, 64), 0.999)
        out = add_noise(stack_of(plane), NoiseParams.from_scalars(1e-2, 0), seed=5)
        assert out.r.max() <= 1.0 and out.r.min() >= 0.0


class TestSynthesize:
    def test_identity_model_bit_exact(self, rng, identity_model):
        raw = random_raw(rng, 16, 16)
        out = synthesize(raw, identity_model)
        assert out.same_pixels(raw)

    def test_deterministic(self, rng, toled_model):
        raw = random_raw(rng, 128, 128)
        assert synthesize(raw, toled_model).same_pixels(synthesize(raw, toled_model))

    def test_grating_blur_is_directional(self, toled_model):
        # period-4 checkerboard mosaic: sharp in both axes
        size = 128
        yy, xx = np.indices((size, size))
        chart = (((yy // 4) + (xx // 4)) % 2).astype(np.float64) * 0.8 + 0.1
        raw = BayerRaw((chart * 65535).astype(np.uint16))
        degraded = synthesize(raw, toled_model)
        plane_in = split_bayer(raw).g1
        plane_out = split_bayer(degraded).g1

        def grad_energies(p):
            horizontal = float(np.sum(np.diff(p, axis=1) ** 2))
            vertical = float(np.sum(np.diff(p, axis=0) ** 2))
            return horizontal, vertical

        h_in, v_in = grad_energies(plane_in)
        h_out, v_out = grad_energies(plane_out)
        assert h_out < h_in
        assert h_out / h_in < v_out / v_in  # horizontal contrast suffers more

    def test_low_transmission_model_shifts_blue_red_balance(self, poled_model):
        raw = constant_raw(128, 128, 0.5)
        degraded = synthesize(raw, poled_model)
        stack = split_bayer(degraded)
        ratio = stack.b.mean() / stack.r.mean()
        assert abs(ratio - 0.20 / 0.34) < 0.02


class TestSampling:
    def test_zero_std_returns_mean(self, rng):
        mean = NoiseParams.from_scalars(1e-4, 1e-3)
        out = sample_noise_params(mean, NoiseParams.zero(), rng)
        assert out.lambda_read == mean.lambda_read
        assert out.lambda_shot == mean.lambda_shot

    def test_negative_draws_clamped(self):
        rng = np.random.default_rng(0)
        mean = NoiseParams.from_scalars(1e-8, 1e-8)
        std = NoiseParams.from_scalars(1.0, 1.0)
        for _ in range(10):
            out = sample_noise_params(mean, std, rng)
            assert all(v >= 0 for v in out.lambda_read.values())
            assert all(v >= 0 for v in out.lambda_shot.values())


def test_model_requires_complete_noise_channels():
    with pytest.raises(DomainError):
        NoiseParams({"R": 0.0}, {"R": 0.0})
