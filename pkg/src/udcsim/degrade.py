"""Forward model: clean mosaic -> display-covered mosaic.

The degradation is intensity scaling by a per-channel transmission factor,
circular convolution with the per-channel blur kernel, and signal-dependent
Gaussian noise whose variance is ``lambda_read + lambda_shot * value`` on
normalized intensities. Quantization back to 16 bits happens once, at the
final mosaic reassembly, mimicking a single ADC stage.

Boundary handling is circular everywhere so that the restoration module's
frequency-domain inverse is an exact partner of this forward model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DimensionError, DomainError
from .optics import PsfSet
from .raw import CHANNELS, BayerRaw, ChannelStack, merge_bayer, split_bayer


def _per_channel(values: Mapping[str, float], what: str, minimum_exclusive: bool) -> dict[str, float]:
    out = {}
    for name in CHANNELS:
        if name not in values:
            raise DomainError(f"{what} is missing channel {name}")
        value = float(values[name])
        if not np.isfinite(value):
            raise DomainError(f"{what}[{name}] must be finite, got {value}")
        if minimum_exclusive and not value > 0:
            raise DomainError(f"{what}[{name}] must be positive, got {value}")
        if not minimum_exclusive and value < 0:
            raise DomainError(f"{what}[{name}] must be non-negative, got {value}")
        out[name] = value
    return out


@dataclass(frozen=True)
class IntensityScale:
    """Per-channel intensity scaling factor (display transmission x gain)."""

    gamma: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "gamma", _per_channel(self.gamma, "gamma", True))

    def __getitem__(self, channel: str) -> float:
        return self.gamma[channel]

    @classmethod
    def from_rgb(cls, r: float, g: float, b: float) -> "IntensityScale":
        """Three measured colors; both green sites share the green value."""
        return cls({"R": r, "G1": g, "G2": g, "B": b})

    @classmethod
    def uniform(cls, value: float) -> "IntensityScale":
        return cls({name: value for name in CHANNELS})


@dataclass(frozen=True)
class NoiseParams:
    """Heteroscedastic Gaussian noise: variance = lambda_read + lambda_shot * value."""

    lambda_read: Mapping[str, float]
    lambda_shot: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "lambda_read", _per_channel(self.lambda_read, "lambda_read", False))
        object.__setattr__(self, "lambda_shot", _per_channel(self.lambda_shot, "lambda_shot", False))

    @classmethod
    def from_scalars(cls, lambda_read: float, lambda_shot: float) -> "NoiseParams":
        return cls(
            {name: lambda_read for name in CHANNELS},
            {name: lambda_shot for name in CHANNELS},
        )

    @classmethod
    def zero(cls) -> "NoiseParams":
        return cls.from_scalars(0.0, 0.0)


@dataclass(frozen=True)
class DegradationModel:
    """Everything needed to synthesize a degraded frame deterministically."""

    scale: IntensityScale
    psfs: PsfSet
    noise: NoiseParams
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed))


def apply_gamma(stack: ChannelStack, scale: IntensityScale) -> ChannelStack:
    """Multiply each plane by its channel's scaling factor. No clipping here."""
    return stack.map(lambda name, plane: plane * scale[name])


def _padded_kernel(kernel: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Kernel embedded in a plane-sized array with its center pixel at (0, 0).

    This fixes the single centering convention used by both the forward
    convolution and the frequency-domain inverse.
    """
    kh, kw = kernel.shape
    height, width = shape
    if kh > height or kw > width:
        raise DimensionError(f"kernel {kernel.shape} does not fit in plane {shape}")
    padded = np.zeros(shape, dtype=np.float64)
    padded[:kh, :kw] = kernel
    return np.roll(padded, (-(kh // 2), -(kw // 2)), axis=(0, 1))


def kernel_spectrum(kernel: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Full-plane transform of a center-origin kernel."""
    return np.fft.fft2(_padded_kernel(kernel, shape))


def kernel_half_spectrum(kernel: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Half-plane (real-input) transform of a center-origin kernel."""
    return np.fft.rfft2(_padded_kernel(kernel, shape))


def convolve_plane(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Circular convolution with a center-origin kernel, same output size."""
    spectrum = np.fft.rfft2(plane) * kernel_half_spectrum(kernel, plane.shape)
    return np.fft.irfft2(spectrum, s=plane.shape)


def convolve_psf(stack: ChannelStack, psfs: PsfSet) -> ChannelStack:
    return stack.map(lambda name, plane: convolve_plane(plane, psfs.for_channel(name).kernel))


def _channel_rng(seed: int, channel_index: int) -> np.random.Generator:
    # independent, reproducible stream per (seed, channel)
    return np.random.default_rng(
        np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, channel_index])
    )


def add_noise(stack: ChannelStack, noise: NoiseParams, seed: int, *, clip: bool = True) -> ChannelStack:
    """Add zero-mean Gaussian noise with signal-dependent variance.

    Deterministic for a fixed seed; each channel draws from its own stream.
    ``clip=False`` skips the [0, 1] saturation clamp (useful when checking
    the raw noise statistics).
    """

    def noisy(name: str, plane: np.ndarray) -> np.ndarray:
        if plane.size and plane.min() < 0:
            raise DomainError(
                f"plane {name} has negative values; noise variance would be undefined"
            )
        variance = noise.lambda_read[name] + noise.lambda_shot[name] * plane
        rng = _channel_rng(seed, CHANNELS.index(name))
        out = plane + rng.standard_normal(plane.shape) * np.sqrt(variance)
        return np.clip(out, 0.0, 1.0) if clip else out

    return stack.map(noisy)


def synthesize(raw_gt: BayerRaw, model: DegradationModel) -> BayerRaw:
    """Full forward pipeline: split, scale, blur, noise, reassemble."""
    stack = split_bayer(raw_gt)
    stack = apply_gamma(stack, model.scale)
    stack = convolve_psf(stack, model.psfs)
    stack = add_noise(stack, model.noise, model.seed)
    return merge_bayer(stack, white_level=raw_gt.white_level, black_level=raw_gt.black_level)


def sample_noise_params(
    mean: NoiseParams, std: NoiseParams, rng: np.random.Generator
) -> NoiseParams:
    """Draw per-image noise parameters around calibrated means.

    Negative draws clamp to zero; a zero std reproduces ``mean`` exactly.
    """
    read = {}
    shot = {}
    for name in CHANNELS:
        read[name] = max(0.0, mean.lambda_read[name] + std.lambda_read[name] * rng.standard_normal())
        shot[name] = max(0.0, mean.lambda_shot[name] + std.lambda_shot[name] * rng.standard_normal())
    return NoiseParams(read, shot)
