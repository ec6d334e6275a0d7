"""Acceptance criteria for the toolkit, one test per criterion.

Each test prints a [PASS]/[FAIL] line (visible with ``pytest -s``) and
pins its tolerance explicitly.
"""

import math
import time
from contextlib import contextmanager

import numpy as np

from udcsim.calibrate import (
    IntensityPairSeries,
    estimate_gamma,
    estimate_noise,
    measure_mtf,
)
from udcsim.degrade import (
    DegradationModel,
    NoiseParams,
    IntensityScale,
    add_noise,
    synthesize,
)
from udcsim.metrics import psnr, ssim
from udcsim.optics import (
    DisplayPattern,
    OpticalConfig,
    Psf,
    PsfSet,
    downsample_factor,
    psf_anisotropy,
    simulate_psf,
)
from udcsim.patterns import synthetic_scene_raw
from udcsim.raw import CHANNELS, ChannelStack, split_bayer
from udcsim.restore import RestoreParams, demosaic_bilinear, restore, wiener_deconvolve

from conftest import random_raw
from test_optics import brute_force_centered_spectrum, unit_r_config


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    print(f"[PASS] {name}")


def test_criterion_psf_oracle_equivalence(rng):
    name = "PSF oracle equivalence (<=8x8, r=1, 1e-12/element, <1s)"
    with criterion(name):
        config = unit_r_config()
        elapsed = 0.0
        cases = 0
        for rows in range(2, 9):
            for cols in range(2, 9):
                for _ in range(2):
                    grid = rng.random((rows, cols))
                    pattern = DisplayPattern(grid, 10.0)
                    start = time.perf_counter()
                    psf = simulate_psf(
                        pattern, config, 640.0, channel="R",
                        assume_cropped=True, min_energy=None,
                    )
                    elapsed += time.perf_counter() - start
                    oracle = brute_force_centered_spectrum(grid)
                    oracle /= oracle.sum()
                    assert psf.kernel.shape == oracle.shape
                    assert np.max(np.abs(psf.kernel - oracle)) < 1e-12
                    cases += 1
        assert cases == 98
        assert elapsed < 1.0, f"simulation took {elapsed:.3f}s"


def test_criterion_kernel_normalization(rng):
    name = "Kernel normalization (sum 1 within 1e-9, 100+ random patterns)"
    with criterion(name):
        checked = 0
        for index in range(105):
            size = int(rng.integers(3, 17))
            grid = rng.random((size, size))
            factor = float(rng.uniform(1.0, 4.0))
            config = OpticalConfig(r_override={"R": factor, "G": factor, "B": factor})
            min_energy = None if index % 2 else 0.9999
            psf = simulate_psf(
                DisplayPattern(grid, 10.0), config, 640.0, channel="R",
                assume_cropped=True, min_energy=min_energy,
            )
            assert abs(psf.kernel.sum() - 1.0) < 1e-9
            assert psf.kernel.min() >= 0.0
            checked += 1
        assert checked >= 100


def test_criterion_resampling_factor_consistency():
    name = "Resampling-factor consistency (overrides within 1%, geometry exact)"
    with criterion(name):
        overrides = {"R": 2.41, "G": 2.98, "B": 3.44}
        wavelengths = {"R": 640.0, "G": 520.0, "B": 450.0}
        config = OpticalConfig(r_override=overrides)
        products = [
            downsample_factor(config, wavelengths[color], channel=color) * wavelengths[color]
            for color in ("R", "G", "B")
        ]
        spread = (max(products) - min(products)) / float(np.mean(products))
        assert spread < 0.01, f"override product spread {spread:.4f}"

        geometric = OpticalConfig()
        exact = [
            downsample_factor(geometric, wl) * wl for wl in wavelengths.values()
        ]
        assert max(exact) - min(exact) <= 1e-12 * max(exact)


def test_criterion_directional_blur(stripe_psfs, toled_model):
    name = "Directional blur (moment ratio > 1, horizontal mid-band MTF below vertical)"
    with criterion(name):
        ratio = psf_anisotropy(stripe_psfs.r)
        assert ratio > 1.0, f"moment ratio {ratio}"
        freqs = [0.02, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4]
        horizontal = measure_mtf(toled_model, freqs, "horizontal").samples["horizontal"]
        vertical = measure_mtf(toled_model, freqs, "vertical").samples["vertical"]
        matched = [
            (f, h, v)
            for (f, h), (_, v) in zip(horizontal, vertical)
            if 0.1 <= f <= 0.4
        ]
        assert matched
        for f, h, v in matched:
            assert h < v, f"f={f}: horizontal {h} !< vertical {v}"


def null_free_psfs(shape=(5, 5), sigma=1.0) -> PsfSet:
    coords = np.arange(shape[0]) - (shape[0] - 1) / 2.0
    g = np.exp(-(coords**2) / (2 * sigma**2))
    kernel = np.outer(g, g)
    kernel /= kernel.sum()

    def psf(ch):
        return Psf(kernel=kernel, channel=ch)

    return PsfSet(r=psf("R"), g1=psf("G1"), g2=psf("G2"), b=psf("B"))


def test_criterion_forward_inverse_consistency(rng, identity_model):
    name = "Forward/inverse consistency (>=50 dB nulless round trip, identity bit-exact)"
    with criterion(name):
        clean = random_raw(rng, 64, 64)
        model = DegradationModel(
            scale=IntensityScale.uniform(1.0),
            psfs=null_free_psfs(),
            noise=NoiseParams.zero(),
            seed=3,
        )
        degraded = synthesize(clean, model)
        clean_stack = split_bayer(clean)
        degraded_stack = split_bayer(degraded)
        for channel in CHANNELS:
            recovered = wiener_deconvolve(
                degraded_stack.planes()[channel], model.psfs.for_channel(channel), 0.0
            )
            value = psnr(recovered, clean_stack.planes()[channel])
            assert value >= 50.0, f"{channel}: {value:.2f} dB"

        identity_out = synthesize(clean, identity_model)
        assert identity_out.same_pixels(clean)


def test_criterion_calibration_round_trips(rng):
    name = "Calibration round trips (gamma 1%, noise 5%, <30s)"
    with criterion(name):
        start = time.perf_counter()
        x = np.arange(0, 256, 10) / 255.0
        for slope in (0.97, 0.34, 0.20):
            points = {}
            for channel in CHANNELS:
                y = slope * x + rng.normal(0.0, 1e-3, size=x.shape)
                points[channel] = np.column_stack([x, y])
            scale = estimate_gamma(IntensityPairSeries(points))
            for channel in CHANNELS:
                err = abs(scale[channel] - slope) / slope
                assert err < 0.01, f"slope {slope}, channel {channel}: {err:.4f}"

        truth = NoiseParams.from_scalars(1e-4, 1e-2)
        pairs = []
        for index in range(16):
            level = (index + 0.5) / 16.0
            plane = np.full((250, 400), level)  # 1e5 samples per level
            clean = ChannelStack(plane, plane.copy(), plane.copy(), plane.copy())
            pairs.append((add_noise(clean, truth, 900 + index, clip=False), clean))
        recovered = estimate_noise(pairs)
        for channel in CHANNELS:
            read_err = abs(recovered.lambda_read[channel] - 1e-4) / 1e-4
            shot_err = abs(recovered.lambda_shot[channel] - 1e-2) / 1e-2
            assert read_err < 0.05, f"{channel}: lambda_read off by {read_err:.4f}"
            assert shot_err < 0.05, f"{channel}: lambda_shot off by {shot_err:.4f}"
        elapsed = time.perf_counter() - start
        assert elapsed < 30.0, f"calibration took {elapsed:.1f}s"


def test_criterion_noise_statistics():
    name = "Noise statistics (empirical variance within 2% at 1e6 samples)"
    with criterion(name):
        plane = np.full((1000, 1000), 0.25)
        stack = ChannelStack(plane, plane.copy(), plane.copy(), plane.copy())
        noise = NoiseParams.from_scalars(1e-4, 1e-2)
        out = add_noise(stack, noise, seed=2024, clip=False)
        expected = 1e-4 + 1e-2 * 0.25
        observed = float(np.var(out.g1 - plane))
        rel = abs(observed - expected) / expected
        assert rel < 0.02, f"variance off by {rel:.4f}"


def test_criterion_end_to_end_improvement(toled_model, poled_model):
    name = "End-to-end improvement (PSNR gain on >=95%, blue/red corrected on all)"
    with criterion(name):
        improved = 0
        total = 0
        ratio_failures = []
        for model_index, model in enumerate((toled_model, poled_model)):
            params = RestoreParams(
                denoise_strength=0.01, auto_nsr=True, noise=model.noise
            )
            for image_index in range(10):
                clean = synthetic_scene_raw(128, 128, seed=100 * model_index + image_index)
                degraded = synthesize(
                    clean, DegradationModel(model.scale, model.psfs, model.noise,
                                            seed=model.seed + image_index)
                )
                reference = demosaic_bilinear(clean)
                baseline = demosaic_bilinear(degraded)
                restored = restore(degraded, model.psfs, model.scale, params)
                if psnr(restored, reference) > psnr(baseline, reference):
                    improved += 1
                total += 1
                if model is poled_model:
                    def blue_red(image):
                        return float(image.channels[..., 2].mean() / image.channels[..., 0].mean())

                    base_ratio = blue_red(baseline)
                    restored_ratio = blue_red(restored)
                    if abs(restored_ratio - 1.0) >= abs(base_ratio - 1.0):
                        ratio_failures.append(image_index)
        assert total == 20
        assert improved / total >= 0.95, f"improved on {improved}/{total}"
        assert not ratio_failures, f"blue/red not corrected on images {ratio_failures}"


def test_criterion_metric_correctness():
    name = "Metric correctness (48.13 dB closed form, SSIM 1.0 identity, 1e-6)"
    with criterion(name):
        a = np.full((32, 32), 0.5)
        b = a + 1.0 / 255.0
        assert abs(psnr(a, b) - 20.0 * math.log10(255.0)) < 1e-6
        image = np.linspace(0.0, 1.0, 32 * 32).reshape(32, 32)
        assert abs(ssim(image, image) - 1.0) < 1e-6


def test_criterion_performance_envelope(toled_model):
    name = "Performance envelope (1024x2048 restore < 5s)"
    with criterion(name):
        clean = synthetic_scene_raw(1024, 2048, seed=42)
        degraded = synthesize(clean, toled_model)
        params = RestoreParams(denoise_strength=0.01, nsr=1e-3)
        start = time.perf_counter()
        restored = restore(degraded, toled_model.psfs, toled_model.scale, params)
        elapsed = time.perf_counter() - start
        assert restored.channels.shape == (1024, 2048, 3)
        assert elapsed < 5.0, f"restore took {elapsed:.2f}s"
        print(f"  (restore wall time: {elapsed:.2f}s)")
