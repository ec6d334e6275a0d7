"""Restoration pipeline for display-covered captures.

Per channel: denoise, undo the intensity scaling, frequency-domain
deconvolution against the known blur kernel, then reassemble the mosaic
and demosaic to RGB by bilinear interpolation. Every stage maps [0, 1]
planes to [0, 1] planes; there is no randomness anywhere.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Union

import numpy as np
from scipy import ndimage

from .degrade import (
    NoiseParams,
    IntensityScale,
    kernel_half_spectrum as _kernel_half_spectrum,
    kernel_spectrum,
)
from .errors import (
    DimensionError,
    DomainError,
    ExternalToolError,
    IllConditionedError,
)
from .optics import Psf, PsfSet
from .raw import CHANNELS, BayerRaw, ChannelStack, RgbImage, merge_bayer, split_bayer


@dataclass(frozen=True)
class RestoreParams:
    """Knobs for the restoration chain.

    ``denoise_strength`` is a non-negative value per channel (a bare float
    applies to all four); 0 disables denoising. ``nsr`` is the Wiener
    noise-to-signal ratio, a scalar or a full-plane per-frequency map.
    With ``auto_nsr`` the ratio is derived per plane from the calibrated
    ``noise`` parameters and the observed signal power. An external
    denoiser executable can replace the built-in one (see
    ``denoise_channel``).
    """

    denoise_strength: Union[float, Mapping[str, float]] = 0.0
    nsr: Union[float, np.ndarray] = 0.0
    auto_nsr: bool = False
    noise: NoiseParams | None = None
    denoiser_command: str | None = None

    def __post_init__(self):
        strengths = self.strengths()
        for name, value in strengths.items():
            if value < 0:
                raise DomainError(f"denoise_strength[{name}] must be >= 0, got {value}")
        if np.isscalar(self.nsr):
            if self.nsr < 0:
                raise DomainError(f"nsr must be >= 0, got {self.nsr}")
        else:
            arr = np.asarray(self.nsr, dtype=np.float64)
            if arr.min() < 0:
                raise DomainError("per-frequency nsr map must be non-negative")
        if self.auto_nsr and self.noise is None:
            raise DomainError("auto_nsr needs calibrated noise parameters")

    def strengths(self) -> dict[str, float]:
        if isinstance(self.denoise_strength, Mapping):
            return {name: float(self.denoise_strength.get(name, 0.0)) for name in CHANNELS}
        return {name: float(self.denoise_strength) for name in CHANNELS}


# ---------------------------------------------------------------------------
# Denoising
# ---------------------------------------------------------------------------

def _smooth_undecimated(plane: np.ndarray, step: int) -> np.ndarray:
    # separable [1/4, 1/2, 1/4] at dilation `step`, circular boundary
    out = 0.5 * plane
    out += 0.25 * (np.roll(plane, step, axis=0) + np.roll(plane, -step, axis=0))
    out2 = 0.5 * out
    out2 += 0.25 * (np.roll(out, step, axis=1) + np.roll(out, -step, axis=1))
    return out2


@lru_cache(maxsize=None)
def _band_noise_gains(levels: int) -> tuple[float, ...]:
    """Unit-white-noise standard deviation of each undecimated detail band.

    Computed from the equivalent filter of each band (impulse response of
    the linear decomposition), so thresholds can track the per-band noise
    level with a single strength knob.
    """
    size = 1 << max(6, levels + 3)
    impulse = np.zeros((size, size))
    impulse[size // 2, size // 2] = 1.0
    gains = []
    smooth = impulse
    for level in range(levels):
        coarser = _smooth_undecimated(smooth, 1 << level)
        gains.append(float(np.sqrt(np.sum((smooth - coarser) ** 2))))
        smooth = coarser
    return tuple(gains)


def denoise_channel(
    plane: np.ndarray,
    strength: float,
    *,
    levels: int = 3,
    command: str | None = None,
) -> np.ndarray:
    """Translation-invariant wavelet soft-threshold denoiser.

    The plane is decomposed into undecimated detail bands; each band is
    soft-thresholded at ``strength`` times its unit-noise gain, so the knob
    plays the role of an assumed noise sigma. ``strength`` 0 returns the
    input unchanged.

    ``command`` swaps in an external denoiser executable. The contract:
    the command is invoked as ``<command> <in.npy> <out.npy> <strength>``
    and must write a float array of the same shape to ``out.npy``.
    """
    if strength < 0:
        raise DomainError(f"strength must be >= 0, got {strength}")
    if command is not None:
        return _run_external_denoiser(plane, strength, command)
    plane = np.asarray(plane, dtype=np.float64)
    if strength == 0.0:
        return plane
    gains = _band_noise_gains(levels)
    smooth = plane
    restored = np.zeros_like(plane)
    for level in range(levels):
        coarser = _smooth_undecimated(smooth, 1 << level)
        detail = smooth - coarser
        threshold = strength * gains[level]
        restored += np.sign(detail) * np.maximum(np.abs(detail) - threshold, 0.0)
        smooth = coarser
    return np.clip(restored + smooth, 0.0, 1.0)


def _run_external_denoiser(plane: np.ndarray, strength: float, command: str) -> np.ndarray:
    plane = np.asarray(plane, dtype=np.float64)
    with tempfile.TemporaryDirectory(prefix="udcsim-denoise-") as tmp:
        in_path = Path(tmp) / "in.npy"
        out_path = Path(tmp) / "out.npy"
        np.save(in_path, plane)
        argv = shlex.split(command) + [str(in_path), str(out_path), repr(float(strength))]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True)
        except OSError as exc:
            raise ExternalToolError(f"cannot run denoiser {command!r}: {exc}") from exc
        if proc.returncode != 0:
            raise ExternalToolError(
                f"denoiser {command!r} exited {proc.returncode}: {proc.stderr.strip()}"
            )
        if not out_path.is_file():
            raise ExternalToolError(f"denoiser {command!r} wrote no output file")
        result = np.asarray(np.load(out_path), dtype=np.float64)
    if result.shape != plane.shape:
        raise ExternalToolError(
            f"denoiser returned shape {result.shape}, expected {plane.shape}"
        )
    return np.clip(result, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Inverse scaling and deconvolution
# ---------------------------------------------------------------------------

def inverse_gamma(stack: ChannelStack, scale: IntensityScale) -> ChannelStack:
    """Divide each plane by its channel's scaling factor, clip to [0, 1]."""
    for name in CHANNELS:
        if not scale[name] > 0:
            raise DomainError(f"gamma[{name}] must be positive to invert")

    def rescale(name: str, plane: np.ndarray) -> np.ndarray:
        out = plane / scale[name]
        np.clip(out, 0.0, 1.0, out=out)
        return out

    return stack.map(rescale)


def auto_nsr(plane: np.ndarray, lambda_read: float, lambda_shot: float) -> float:
    """Noise-to-signal heuristic: expected noise variance over signal power.

    Signal power is the plane's variance (mean-removed power): the DC
    component passes the deconvolution filter untouched, so only the
    fluctuating part competes with noise.
    """
    plane = np.asarray(plane, dtype=np.float64)
    power = float(np.var(plane))
    noise_var = lambda_read + lambda_shot * float(np.mean(plane))
    return noise_var / max(power, 1e-6)


def wiener_deconvolve(
    plane: np.ndarray, psf: Psf | np.ndarray, nsr: Union[float, np.ndarray]
) -> np.ndarray:
    """Frequency-domain deconvolution: conj(H) * Y / (|H|^2 + nsr).

    ``nsr`` may be a scalar or a per-frequency map matching the plane shape
    (unshifted transform layout). With ``nsr`` 0 the kernel must be free of
    near-null frequencies; otherwise the filter magnitude stays bounded by
    1 / (2 sqrt(nsr)) everywhere. Output is the real part, clipped to [0, 1].
    """
    plane = np.asarray(plane, dtype=np.float64)
    kernel = psf.kernel if isinstance(psf, Psf) else np.asarray(psf, dtype=np.float64)
    if np.isscalar(nsr):
        if nsr < 0:
            raise DomainError(f"nsr must be >= 0, got {nsr}")
        # real input and scalar regularizer: the half-spectrum transform
        # carries the whole computation
        transfer = _kernel_half_spectrum(kernel, plane.shape)
        power = transfer.real**2 + transfer.imag**2
        if nsr == 0:
            nulls = int(np.count_nonzero(power < 1e-24))
            if nulls:
                raise IllConditionedError(
                    f"{nulls} transfer frequencies below 1e-12 in magnitude with zero "
                    "nsr; increase nsr to regularize"
                )
        estimate = np.conj(transfer)
        estimate *= np.fft.rfft2(plane)
        power += float(nsr)
        estimate /= power
        out = np.fft.irfft2(estimate, s=plane.shape)
    else:
        nsr_grid = np.asarray(nsr, dtype=np.float64)
        if nsr_grid.shape != plane.shape:
            raise DimensionError(
                f"nsr map shape {nsr_grid.shape} must match plane shape {plane.shape}"
            )
        if nsr_grid.min() < 0:
            raise DomainError("nsr map must be non-negative")
        transfer = kernel_spectrum(kernel, plane.shape)
        power = transfer.real**2 + transfer.imag**2
        nulls = int(np.count_nonzero((power < 1e-24) & (nsr_grid == 0)))
        if nulls:
            raise IllConditionedError(
                f"{nulls} transfer frequencies below 1e-12 in magnitude with zero nsr; "
                "increase nsr to regularize"
            )
        estimate = np.conj(transfer) * np.fft.fft2(plane) / (power + nsr_grid)
        out = np.fft.ifft2(estimate).real
    np.clip(out, 0.0, 1.0, out=out)
    return out


# ---------------------------------------------------------------------------
# Demosaicing
# ---------------------------------------------------------------------------

_KERNEL_CROSS = np.array([[0.0, 0.25, 0.0], [0.25, 1.0, 0.25], [0.0, 0.25, 0.0]])
_KERNEL_FULL = np.array([[0.25, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 0.25]])


def demosaic_bilinear(raw: BayerRaw) -> RgbImage:
    """Full-resolution RGB by bilinear interpolation of missing CFA sites.

    Green uses its four cross neighbors, red/blue their row, column, or
    diagonal neighbors as the site demands. Borders extend by edge
    replication (nearest-neighbor extension of the sample lattice). A small
    set of buffers is reused across the three channels; full-resolution
    temporaries dominate the cost of this stage otherwise.
    """
    data = raw.samples.astype(np.float64)
    data /= float(raw.white_level)
    height, width = data.shape
    out = np.empty((height, width, 3))
    mask = np.empty_like(data)
    masked = np.empty_like(data)
    num = np.empty_like(data)
    den = np.empty_like(data)
    sites = {
        0: ([(0, 0)], _KERNEL_FULL),               # red
        1: ([(0, 1), (1, 0)], _KERNEL_CROSS),      # both green rows
        2: ([(1, 1)], _KERNEL_FULL),               # blue
    }
    for index, (offsets, kernel) in sites.items():
        mask[:] = 0.0
        for dy, dx in offsets:
            mask[dy::2, dx::2] = 1.0
        np.multiply(data, mask, out=masked)
        ndimage.convolve(masked, kernel, output=num, mode="nearest")
        ndimage.convolve(mask, kernel, output=den, mode="nearest")
        np.divide(num, den, out=out[..., index])
    np.clip(out, 0.0, 1.0, out=out)
    return RgbImage(out)


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------

def restore(
    raw: BayerRaw, psfs: PsfSet, scale: IntensityScale, params: RestoreParams
) -> RgbImage:
    """Denoise, rescale, deconvolve per channel, reassemble, demosaic."""
    strengths = params.strengths()
    stack = split_bayer(raw)
    stack = stack.map(
        lambda name, plane: denoise_channel(
            plane, strengths[name], command=params.denoiser_command
        )
    )
    stack = inverse_gamma(stack, scale)

    def deconvolve(name: str, plane: np.ndarray) -> np.ndarray:
        if params.auto_nsr:
            assert params.noise is not None  # enforced at construction
            nsr = auto_nsr(
                plane, params.noise.lambda_read[name], params.noise.lambda_shot[name]
            )
        else:
            nsr = params.nsr
        return wiener_deconvolve(plane, psfs.for_channel(name), nsr)

    stack = stack.map(deconvolve)
    merged = merge_bayer(stack, white_level=raw.white_level, black_level=raw.black_level)
    return demosaic_bilinear(merged)
