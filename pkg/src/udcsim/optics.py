"""Diffraction blur kernels for a camera imaging through a display panel.

The display's pixel layout acts as an amplitude mask at the lens pupil.
For distant, effectively coherent light the focal-plane intensity is the
squared magnitude of the discrete Fourier transform of the masked layout.
To land that intensity grid on the sensor's per-channel pixel pitch it is
resampled by a wavelength-dependent factor ``r``, then normalized to a
unit-sum blur kernel.

Grid conventions, shared with the convolution and deconvolution code:

- spectra are centered (zero frequency at index ``n // 2`` on each axis);
- kernels use odd-sized supports with the origin at the center pixel,
  except when resampling is skipped (``r == 1``), where the raw spectrum
  grid is kept as-is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import keyval, raw as rawmod
from .errors import (
    ConfigError,
    CoverageError,
    DegenerateKernelError,
    DimensionError,
    DomainError,
    ImageIoError,
)

DEFAULT_WAVELENGTHS_NM: dict[str, float] = {"R": 640.0, "G": 520.0, "B": 450.0}

#: channel role -> color key used for wavelengths and overrides
COLOR_OF_CHANNEL = {"R": "R", "G1": "G", "G2": "G", "B": "B"}


@dataclass(frozen=True)
class DisplayPattern:
    """Sampled transmittance map of a display pixel layout.

    ``pitch_um`` is the physical size of one sample. Values live in [0, 1]:
    1 is fully open, 0 fully blocked.
    """

    transmittance: np.ndarray
    pitch_um: float

    def __post_init__(self):
        grid = np.array(self.transmittance, dtype=np.float64)
        if grid.ndim != 2:
            raise DimensionError(f"transmittance must be 2-D, got shape {grid.shape}")
        if min(grid.shape) < 2:
            raise DimensionError(f"pattern needs at least 2 samples per axis, got {grid.shape}")
        if grid.min() < 0.0 or grid.max() > 1.0:
            raise DomainError(
                f"transmittance outside [0, 1]: range [{grid.min()}, {grid.max()}]"
            )
        if not self.pitch_um > 0:
            raise DomainError(f"pitch_um must be positive, got {self.pitch_um}")
        grid.setflags(write=False)
        object.__setattr__(self, "transmittance", grid)
        object.__setattr__(self, "pitch_um", float(self.pitch_um))

    @property
    def extent_um(self) -> tuple[float, float]:
        rows, cols = self.transmittance.shape
        return rows * self.pitch_um, cols * self.pitch_um


@dataclass(frozen=True)
class OpticalConfig:
    """Camera-side geometry needed to scale the diffraction pattern.

    Defaults match the reference system this toolkit models: a 3333 um
    circular aperture, 6000 um focal length, and 3.1 um per-channel sensor
    pitch (the mosaic is reassembled into half-resolution channels, which
    doubles the native pitch).

    ``r_override`` pins the resampling factor per color key ("R", "G",
    "B"), bypassing the geometric formula. ``wavelength_samples`` optionally
    lists (wavelength_nm, weight) pairs per color for polychromatic kernels;
    by default each channel uses its single center wavelength.
    """

    aperture_diameter_um: float = 3333.0
    focal_length_um: float = 6000.0
    sensor_pitch_um: float = 3.1
    wavelengths_nm: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULT_WAVELENGTHS_NM)
    )
    r_override: Mapping[str, float] | None = None
    wavelength_samples: Mapping[str, tuple[tuple[float, float], ...]] | None = None

    def __post_init__(self):
        for name in ("aperture_diameter_um", "focal_length_um", "sensor_pitch_um"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        wavelengths = dict(self.wavelengths_nm)
        for key in ("R", "G", "B"):
            if key not in wavelengths:
                raise DomainError(f"wavelengths_nm is missing color {key!r}")
            if not wavelengths[key] > 0:
                raise DomainError(f"wavelength for {key} must be positive")
        object.__setattr__(self, "wavelengths_nm", wavelengths)
        if self.r_override is not None:
            override = dict(self.r_override)
            for key, value in override.items():
                if key not in ("R", "G", "B"):
                    raise DomainError(f"r_override key must be a color (R/G/B), got {key!r}")
                if not value > 0:
                    raise DomainError(f"r_override for {key} must be positive, got {value}")
            object.__setattr__(self, "r_override", override)

    def wavelength_for(self, channel: str) -> float:
        return float(self.wavelengths_nm[COLOR_OF_CHANNEL[channel]])


@dataclass(frozen=True)
class Psf:
    """Normalized blur kernel for one channel, plus its resampling factor."""

    kernel: np.ndarray
    channel: str | None = None
    r: float = 1.0
    wavelength_nm: float | None = None

    def __post_init__(self):
        kernel = np.array(self.kernel, dtype=np.float64)
        if kernel.ndim != 2:
            raise DimensionError(f"kernel must be 2-D, got shape {kernel.shape}")
        if kernel.min() < 0:
            raise DomainError(f"kernel entries must be non-negative, min={kernel.min()}")
        total = kernel.sum()
        if not math.isfinite(total) or abs(total - 1.0) > 1e-9:
            raise DomainError(f"kernel must sum to 1 within 1e-9, got {total!r}")
        kernel.setflags(write=False)
        object.__setattr__(self, "kernel", kernel)


@dataclass(frozen=True)
class PsfSet:
    """One kernel per channel role; G1 and G2 share the green kernel."""

    r: Psf
    g1: Psf
    g2: Psf
    b: Psf

    def __post_init__(self):
        if not np.array_equal(self.g1.kernel, self.g2.kernel):
            raise DomainError("G1 and G2 kernels must be identical")

    def for_channel(self, channel: str) -> Psf:
        return {"R": self.r, "G1": self.g1, "G2": self.g2, "B": self.b}[channel]


def delta_psf(channel: str | None = None) -> Psf:
    """1x1 identity kernel, useful as a blur-free stand-in."""
    return Psf(kernel=np.ones((1, 1)), channel=channel, r=1.0)


def delta_psf_set() -> PsfSet:
    return PsfSet(
        r=delta_psf("R"), g1=delta_psf("G1"), g2=delta_psf("G2"), b=delta_psf("B")
    )


# ---------------------------------------------------------------------------
# Forward simulation
# ---------------------------------------------------------------------------

def crop_aperture(pattern: DisplayPattern, config: OpticalConfig, *, tile: bool = False) -> DisplayPattern:
    """Mask the pattern with the centered circular aperture.

    The output grid is trimmed to the aperture's bounding square. Patterns
    smaller than the aperture are an error unless ``tile`` is set, in which
    case the pattern is treated as a periodic unit cell and replicated.
    """
    diameter_samples = config.aperture_diameter_um / pattern.pitch_um
    side = math.ceil(diameter_samples)
    grid = pattern.transmittance
    rows, cols = grid.shape
    if rows < diameter_samples or cols < diameter_samples:
        if not tile:
            raise CoverageError(
                f"pattern extent {rows * pattern.pitch_um:.1f} x "
                f"{cols * pattern.pitch_um:.1f} um does not cover the "
                f"{config.aperture_diameter_um:.1f} um aperture "
                "(pass tile=True to replicate a periodic unit cell)"
            )
        reps_y = math.ceil(side / rows)
        reps_x = math.ceil(side / cols)
        grid = np.tile(grid, (reps_y, reps_x))
        rows, cols = grid.shape
    top = (rows - side) // 2
    left = (cols - side) // 2
    cropped = grid[top : top + side, left : left + side]
    yy, xx = np.indices((side, side), dtype=np.float64)
    center = (side - 1) / 2.0
    mask = (yy - center) ** 2 + (xx - center) ** 2 <= (diameter_samples / 2.0) ** 2
    return DisplayPattern(cropped * mask, pattern.pitch_um)


def downsample_factor(config: OpticalConfig, wavelength_nm: float, channel: str | None = None) -> float:
    """Spectrum-to-sensor resampling factor for one wavelength.

    Geometric value: aperture extent times sensor pitch over (wavelength
    times focal length). A per-color ``r_override`` wins when present.
    """
    if not wavelength_nm > 0:
        raise DomainError(f"wavelength must be positive, got {wavelength_nm}")
    if channel is not None and config.r_override:
        color = COLOR_OF_CHANNEL.get(channel, channel)
        if color in config.r_override:
            return float(config.r_override[color])
    wavelength_um = wavelength_nm * 1e-3
    return (config.aperture_diameter_um * config.sensor_pitch_um) / (
        wavelength_um * config.focal_length_um
    )


def squared_magnitude_spectrum(grid: np.ndarray) -> np.ndarray:
    """Centered |DFT|^2 of a real grid (zero frequency at index n // 2)."""
    spectrum = np.fft.fft2(np.asarray(grid, dtype=np.float64))
    return np.fft.fftshift(spectrum.real**2 + spectrum.imag**2)


def _resample_centered(grid: np.ndarray, factor: float) -> np.ndarray:
    """Sample the centered grid at spacing ``factor`` with linear interpolation.

    Output is odd-sized and centered on the zero-frequency bin. ``factor``
    of exactly 1 returns the grid unchanged.
    """
    if factor == 1.0:
        return grid
    rows, cols = grid.shape
    cy, cx = rows // 2, cols // 2
    half_y = int(min(cy, rows - 1 - cy) / factor)
    half_x = int(min(cx, cols - 1 - cx) / factor)
    ys = np.clip(cy + factor * np.arange(-half_y, half_y + 1), 0, rows - 1)
    xs = np.clip(cx + factor * np.arange(-half_x, half_x + 1), 0, cols - 1)
    y0 = np.floor(ys).astype(int)
    ty = ys - y0
    y1 = np.minimum(y0 + 1, rows - 1)
    interp_rows = grid[y0, :] * (1.0 - ty)[:, None] + grid[y1, :] * ty[:, None]
    x0 = np.floor(xs).astype(int)
    tx = xs - x0
    x1 = np.minimum(x0 + 1, cols - 1)
    return interp_rows[:, x0] * (1.0 - tx)[None, :] + interp_rows[:, x1] * tx[None, :]


def _truncate_centered(grid: np.ndarray, min_energy: float) -> np.ndarray:
    """Smallest centered odd square holding at least ``min_energy`` of the total.

    Falls back to the largest centered odd square when the criterion cannot
    be met inside the grid (renormalization absorbs the clipped tail).
    """
    rows, cols = grid.shape
    cy, cx = rows // 2, cols // 2
    half_max = min(cy, rows - 1 - cy, cx, cols - 1 - cx)
    total = grid.sum()
    if total <= 0:
        raise DegenerateKernelError("cannot truncate a zero-energy kernel")
    integral = grid.cumsum(axis=0).cumsum(axis=1)

    def boxed(h: int) -> float:
        top, left = cy - h, cx - h
        bottom, right = cy + h, cx + h
        value = integral[bottom, right]
        if top > 0:
            value -= integral[top - 1, right]
        if left > 0:
            value -= integral[bottom, left - 1]
        if top > 0 and left > 0:
            value += integral[top - 1, left - 1]
        return float(value)

    half = half_max
    for h in range(half_max + 1):
        if boxed(h) >= min_energy * total:
            half = h
            break
    return grid[cy - half : cy + half + 1, cx - half : cx + half + 1]


def simulate_psf(
    pattern: DisplayPattern,
    config: OpticalConfig,
    wavelength_nm: float,
    *,
    channel: str | None = None,
    assume_cropped: bool = False,
    tile: bool = False,
    min_energy: float | None = 0.9999,
) -> Psf:
    """Blur kernel for one wavelength.

    Pipeline: aperture crop (skipped when ``assume_cropped``), centered
    squared-magnitude spectrum, resampling by the channel's factor, optional
    energy truncation (``min_energy=None`` keeps the full grid), unit-sum
    normalization.
    """
    masked = pattern if assume_cropped else crop_aperture(pattern, config, tile=tile)
    grid = masked.transmittance
    if not np.any(grid > 0):
        raise DegenerateKernelError("pattern transmits no light; kernel cannot be normalized")
    spectrum = squared_magnitude_spectrum(grid)
    factor = downsample_factor(config, wavelength_nm, channel=channel)
    spectrum = _resample_centered(spectrum, factor)
    if min_energy is not None:
        spectrum = _truncate_centered(spectrum, min_energy)
    total = spectrum.sum()
    if total <= 0:
        raise DegenerateKernelError("resampled spectrum has zero energy")
    return Psf(kernel=spectrum / total, channel=channel, r=factor, wavelength_nm=wavelength_nm)


def simulate_psf_weighted(
    pattern: DisplayPattern,
    config: OpticalConfig,
    samples: tuple[tuple[float, float], ...],
    *,
    channel: str | None = None,
    assume_cropped: bool = False,
    tile: bool = False,
    min_energy: float | None = 0.9999,
) -> Psf:
    """Weighted average of single-wavelength kernels, e.g. over a filter band.

    Kernels are padded to the largest support (centered) before averaging.
    """
    if not samples:
        raise DomainError("need at least one (wavelength, weight) sample")
    weights = np.array([w for _, w in samples], dtype=np.float64)
    if weights.min() < 0 or weights.sum() <= 0:
        raise DomainError("weights must be non-negative with positive sum")
    parts = [
        simulate_psf(
            pattern,
            config,
            wl,
            channel=channel,
            assume_cropped=assume_cropped,
            tile=tile,
            min_energy=min_energy,
        )
        for wl, _ in samples
    ]
    side = max(max(p.kernel.shape) for p in parts)
    if side % 2 == 0:
        side += 1
    combined = np.zeros((side, side))
    for part, weight in zip(parts, weights / weights.sum()):
        kh, kw = part.kernel.shape
        top = (side - kh) // 2
        left = (side - kw) // 2
        combined[top : top + kh, left : left + kw] += weight * part.kernel
    mean_wl = float(np.average([wl for wl, _ in samples], weights=weights))
    mean_r = float(np.average([p.r for p in parts], weights=weights))
    return Psf(kernel=combined / combined.sum(), channel=channel, r=mean_r, wavelength_nm=mean_wl)


def psf_set(
    pattern: DisplayPattern,
    config: OpticalConfig,
    *,
    tile: bool = False,
    min_energy: float | None = 0.9999,
) -> PsfSet:
    """Kernels for all four channel roles; one simulation per distinct setup."""
    masked = crop_aperture(pattern, config, tile=tile)
    cache: dict[tuple[float, float], Psf] = {}

    def kernel_for(channel: str) -> Psf:
        color = COLOR_OF_CHANNEL[channel]
        band = config.wavelength_samples.get(color) if config.wavelength_samples else None
        wavelength = config.wavelength_for(channel)
        factor = downsample_factor(config, wavelength, channel=channel)
        key = (wavelength, factor)
        if band:
            base = simulate_psf_weighted(
                masked, config, tuple(band), channel=channel,
                assume_cropped=True, min_energy=min_energy,
            )
        elif key in cache:
            base = cache[key]
        else:
            base = simulate_psf(
                masked, config, wavelength, channel=channel,
                assume_cropped=True, min_energy=min_energy,
            )
            cache[key] = base
        return Psf(kernel=base.kernel, channel=channel, r=base.r, wavelength_nm=base.wavelength_nm)

    return PsfSet(
        r=kernel_for("R"), g1=kernel_for("G1"), g2=kernel_for("G2"), b=kernel_for("B")
    )


def psf_anisotropy(psf: Psf) -> float:
    """Ratio of horizontal to vertical centered second moments.

    Returns ``inf`` when the kernel has zero vertical extent (a horizontal
    line) and 1.0 for a single point.
    """
    kernel = psf.kernel
    total = kernel.sum()
    ys, xs = np.indices(kernel.shape, dtype=np.float64)
    mean_y = float((kernel * ys).sum() / total)
    mean_x = float((kernel * xs).sum() / total)
    moment_h = float((kernel * (xs - mean_x) ** 2).sum() / total)
    moment_v = float((kernel * (ys - mean_y) ** 2).sum() / total)
    if moment_v == 0.0:
        return 1.0 if moment_h == 0.0 else math.inf
    return moment_h / moment_v


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def save_display_pattern(path: str | Path, pattern: DisplayPattern) -> None:
    """16-bit grayscale PNG (transmittance scaled to full range) + sidecar pitch."""
    rawmod.write_gray16_png(path, rawmod.quantize(pattern.transmittance, 65535))
    keyval.dump(
        {"pitch_um": repr(pattern.pitch_um)},
        rawmod.sidecar_path(path),
        header="display pattern sidecar metadata",
    )


def load_display_pattern(path: str | Path) -> DisplayPattern:
    samples = rawmod.read_gray16_png(path)
    meta_path = rawmod.sidecar_path(path)
    if not meta_path.is_file():
        raise ImageIoError(f"{meta_path}: missing sidecar with pitch_um for display pattern")
    meta = keyval.load(meta_path)
    pitch_um = keyval.get_float(meta, "pitch_um", source=str(meta_path))
    return DisplayPattern(samples.astype(np.float64) / 65535.0, pitch_um)


def save_psf_text(path: str | Path, psf: Psf) -> None:
    """Plain-text kernel: '# key = value' metadata lines, then matrix rows."""
    lines = [
        f"# channel = {psf.channel if psf.channel is not None else '-'}",
        f"# wavelength_nm = {psf.wavelength_nm if psf.wavelength_nm is not None else '-'}",
        f"# r = {psf.r!r}",
        f"# rows = {psf.kernel.shape[0]}",
        f"# cols = {psf.kernel.shape[1]}",
    ]
    for row in psf.kernel:
        lines.append(" ".join(f"{value:.17e}" for value in row))
    keyval.atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def load_psf_text(path: str | Path) -> Psf:
    path = Path(path)
    if not path.is_file():
        raise ImageIoError(f"{path}: no such file")
    meta: dict[str, str] = {}
    rows: list[list[float]] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped.lstrip("#").strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        try:
            rows.append([float(token) for token in stripped.split()])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad kernel row: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: no kernel rows found")
    widths = {len(row) for row in rows}
    if len(widths) != 1:
        raise ConfigError(f"{path}: ragged kernel rows (widths {sorted(widths)})")
    kernel = np.array(rows, dtype=np.float64)
    total = kernel.sum()
    if total <= 0:
        raise ConfigError(f"{path}: kernel has non-positive total {total}")
    kernel = kernel / total  # absorb text round-off so the unit-sum invariant holds
    channel = meta.get("channel")
    channel = None if channel in (None, "-") else channel
    wavelength = meta.get("wavelength_nm")
    wavelength_nm = None if wavelength in (None, "-") else float(wavelength)
    return Psf(
        kernel=kernel,
        channel=channel,
        r=float(meta.get("r", 1.0)),
        wavelength_nm=wavelength_nm,
    )
