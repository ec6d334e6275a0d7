"""Procedural display layouts and test content.

Keeps the experiment scripts and tests self-contained: no captured
micrographs or photographs are required to exercise the full pipeline.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .optics import DisplayPattern
from .raw import BayerRaw, quantize


def open_pattern(size: int, pitch_um: float) -> DisplayPattern:
    """Fully transparent layout; the aperture alone shapes the kernel."""
    return DisplayPattern(np.ones((size, size)), pitch_um)


def stripe_pattern(size: int, pitch_um: float, period: int = 8, open_fraction: float = 0.25) -> DisplayPattern:
    """Grating-like layout: vertical open slits, transmittance varying along
    columns. Diffraction from this layout spreads light horizontally."""
    if not 0 < open_fraction <= 1:
        raise DomainError(f"open_fraction must be in (0, 1], got {open_fraction}")
    open_cols = max(1, int(round(period * open_fraction)))
    cols = np.arange(size) % period < open_cols
    return DisplayPattern(np.broadcast_to(cols.astype(np.float64), (size, size)).copy(), pitch_um)


def perforated_pattern(size: int, pitch_um: float, period: int = 8, open_fraction: float = 0.23) -> DisplayPattern:
    """Matrix-of-openings layout: a square lattice of circular holes, closer
    to a pentile-style sub-pixel arrangement. Spreads light in both axes."""
    if not 0 < open_fraction <= 1:
        raise DomainError(f"open_fraction must be in (0, 1], got {open_fraction}")
    radius = period * np.sqrt(open_fraction / np.pi)
    yy, xx = np.indices((size, size), dtype=np.float64)
    cy = (yy % period) - (period - 1) / 2.0
    cx = (xx % period) - (period - 1) / 2.0
    mask = (cy**2 + cx**2) <= radius**2
    return DisplayPattern(mask.astype(np.float64), pitch_um)


def _lowpass_noise(shape: tuple[int, int], rng: np.random.Generator, cutoff: float) -> np.ndarray:
    noise = rng.standard_normal(shape)
    fy = np.fft.fftfreq(shape[0])[:, None]
    fx = np.fft.fftfreq(shape[1])[None, :]
    keep = np.sqrt(fy**2 + fx**2) <= cutoff
    smooth = np.fft.ifft2(np.fft.fft2(noise) * keep).real
    smooth -= smooth.min()
    peak = smooth.max()
    return smooth / peak if peak > 0 else smooth


def synthetic_scene_raw(
    height: int,
    width: int,
    seed: int,
    *,
    white_level: int = 65535,
    edges: int = 6,
) -> BayerRaw:
    """Procedural natural-ish test frame: smooth shading, mid-frequency
    texture, and hard-edged rectangles, mosaiced to RGGB with near-balanced
    channel gains."""
    rng = np.random.default_rng(seed)
    base = 0.2 + 0.5 * _lowpass_noise((height, width), rng, cutoff=0.03)
    base += 0.25 * (_lowpass_noise((height, width), rng, cutoff=0.15) - 0.5)
    for _ in range(edges):
        top = rng.integers(0, max(1, height - 8))
        left = rng.integers(0, max(1, width - 8))
        h = int(rng.integers(4, max(5, height // 3)))
        w = int(rng.integers(4, max(5, width // 3)))
        level = rng.uniform(0.1, 0.9)
        base[top : top + h, left : left + w] = 0.6 * level + 0.4 * base[top : top + h, left : left + w]
    gains = {
        "R": float(rng.uniform(0.92, 1.0)),
        "G": float(rng.uniform(0.92, 1.0)),
        "B": float(rng.uniform(0.92, 1.0)),
    }
    mosaic = np.empty_like(base)
    mosaic[0::2, 0::2] = base[0::2, 0::2] * gains["R"]
    mosaic[0::2, 1::2] = base[0::2, 1::2] * gains["G"]
    mosaic[1::2, 0::2] = base[1::2, 0::2] * gains["G"]
    mosaic[1::2, 1::2] = base[1::2, 1::2] * gains["B"]
    return BayerRaw(quantize(np.clip(mosaic, 0.0, 1.0), white_level), white_level=white_level)


def constant_raw(height: int, width: int, value: float, *, white_level: int = 65535) -> BayerRaw:
    """Flat-field frame at a normalized value."""
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"value must be in [0, 1], got {value}")
    samples = np.full((height, width), int(round(value * white_level)), dtype=np.uint16)
    return BayerRaw(samples, white_level=white_level)
