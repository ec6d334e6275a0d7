"""Parameter recovery from paired measurements.

Covers the measurement procedures the forward model depends on: the
per-channel intensity scaling factor from a brightness sweep, the noise
variance parameters from paired noisy/clean captures, system frequency
response from sinusoidal charts, and multi-frame averaging for low-noise
reference frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .degrade import DegradationModel, NoiseParams, IntensityScale, convolve_plane
from .errors import DimensionError, DomainError
from .raw import CHANNELS, BayerRaw, ChannelStack, quantize

ORIENTATIONS = ("horizontal", "vertical")


@dataclass(frozen=True)
class IntensityPairSeries:
    """Per-channel (mean without display, mean with display) measurements."""

    points: Mapping[str, np.ndarray]

    def __post_init__(self):
        cleaned = {}
        for name in CHANNELS:
            if name not in self.points:
                raise DomainError(f"series is missing channel {name}")
            arr = np.array(self.points[name], dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
                raise DimensionError(
                    f"channel {name}: expected (n >= 2, 2) point array, got {arr.shape}"
                )
            arr.setflags(write=False)
            cleaned[name] = arr
        object.__setattr__(self, "points", cleaned)


@dataclass(frozen=True)
class MtfCurve:
    """Contrast per spatial frequency, normalized to the lowest frequency."""

    samples: Mapping[str, tuple[tuple[float, float], ...]]

    def __post_init__(self):
        cleaned = {}
        for orientation, pairs in self.samples.items():
            if orientation not in ORIENTATIONS:
                raise DomainError(f"unknown orientation {orientation!r}")
            pairs = tuple((float(f), float(c)) for f, c in pairs)
            freqs = [f for f, _ in pairs]
            if any(b <= a for a, b in zip(freqs, freqs[1:])):
                raise DomainError(f"{orientation}: frequencies must be strictly increasing")
            if any(not 0.0 <= c <= 1.0 for _, c in pairs):
                raise DomainError(f"{orientation}: contrasts must lie in [0, 1]")
            cleaned[orientation] = pairs
        object.__setattr__(self, "samples", cleaned)


@dataclass(frozen=True)
class CalibrationReport:
    """Bundle of recovered parameters plus fit quality."""

    scale: IntensityScale | None = None
    noise: NoiseParams | None = None
    noise_spread: Mapping[str, tuple[float, float]] | None = None  # param -> (mean, std)
    fit_residuals: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for key, value in self.fit_residuals.items():
            if value < 0:
                raise DomainError(f"residual {key} must be >= 0, got {value}")
        if self.noise_spread:
            for key, (_, std) in self.noise_spread.items():
                if std < 0:
                    raise DomainError(f"spread std for {key} must be >= 0, got {std}")
        object.__setattr__(self, "fit_residuals", dict(self.fit_residuals))
        if self.noise_spread is not None:
            object.__setattr__(
                self, "noise_spread", {k: (float(m), float(s)) for k, (m, s) in self.noise_spread.items()}
            )


# ---------------------------------------------------------------------------
# Intensity scaling factor
# ---------------------------------------------------------------------------

def estimate_gamma(series: IntensityPairSeries, *, return_residuals: bool = False):
    """Least-squares slope of with-display vs display-free means, per channel.

    The intercept is pinned at zero: the scaling factor is a ratio of lines
    through the origin, and a free intercept would fold black-level offset
    into transmission. RMS residuals are available for detecting exactly
    that contamination.
    """
    gammas = {}
    residuals = {}
    for name in CHANNELS:
        pts = series.points[name]
        x, y = pts[:, 0], pts[:, 1]
        if np.unique(x).size < 2:
            raise DomainError(f"channel {name}: all abscissae equal, slope is not identifiable")
        sxx = float(np.dot(x, x))
        if sxx == 0.0:
            raise DomainError(f"channel {name}: zero-energy abscissae")
        slope = float(np.dot(x, y)) / sxx
        gammas[name] = slope
        residuals[name] = float(np.sqrt(np.mean((y - slope * x) ** 2)))
    scale = IntensityScale(gammas)
    if return_residuals:
        return scale, residuals
    return scale


# ---------------------------------------------------------------------------
# Noise parameters
# ---------------------------------------------------------------------------

def estimate_noise_plane(
    pairs: Sequence[tuple[np.ndarray, np.ndarray]],
    *,
    bins: int = 16,
    min_count: int = 32,
) -> tuple[float, float, dict]:
    """Variance-vs-intensity regression for one channel.

    ``pairs`` holds (noisy, clean) planes of the same scene. Pixels are
    binned by clean intensity on a uniform [0, 1] grid, the per-bin variance
    of (noisy - clean) is regressed against the per-bin mean clean value.
    Slope is the shot-noise coefficient, intercept the read-noise floor.
    Negative fits clamp to zero with a flag instead of erroring, since
    finite-sample regressions dip below zero near a zero truth.

    Returns (lambda_read, lambda_shot, details) where details carries the
    clamp flags and the RMS fit residual.
    """
    if not pairs:
        raise DomainError("need at least one (noisy, clean) plane pair")
    diffs = []
    cleans = []
    for noisy, clean in pairs:
        noisy = np.asarray(noisy, dtype=np.float64)
        clean = np.asarray(clean, dtype=np.float64)
        if noisy.shape != clean.shape:
            raise DimensionError(f"pair shapes differ: {noisy.shape} vs {clean.shape}")
        diffs.append((noisy - clean).ravel())
        cleans.append(clean.ravel())
    diff = np.concatenate(diffs)
    clean = np.concatenate(cleans)
    edges = np.linspace(0.0, 1.0, bins + 1)
    which = np.clip(np.digitize(clean, edges) - 1, 0, bins - 1)
    levels = []
    variances = []
    for b in range(bins):
        mask = which == b
        count = int(mask.sum())
        if count < max(min_count, 2):
            continue
        levels.append(float(clean[mask].mean()))
        variances.append(float(np.var(diff[mask], ddof=1)))
    if len(levels) < 2 or np.unique(levels).size < 2:
        raise DomainError(
            "fewer than two distinct clean-intensity levels; variance slope is not identifiable"
        )
    levels_arr = np.array(levels)
    var_arr = np.array(variances)
    # The scatter of a sample variance grows with the variance itself, so an
    # unweighted fit lets the high-intensity bins drown the intercept. Weight
    # by 1/variance^2 (inverse squared scale) to stabilize it.
    if var_arr.max() > 0:
        weights = 1.0 / np.maximum(var_arr, 1e-6 * var_arr.max()) ** 2
    else:
        weights = np.ones_like(var_arr)
    sw = weights.sum()
    swx = float(np.sum(weights * levels_arr))
    swy = float(np.sum(weights * var_arr))
    swxx = float(np.sum(weights * levels_arr**2))
    swxy = float(np.sum(weights * levels_arr * var_arr))
    denom = sw * swxx - swx**2
    if denom <= 0:
        raise DomainError("variance regression is rank deficient")
    slope = (sw * swxy - swx * swy) / denom
    intercept = (swxx * swy - swx * swxy) / denom
    fitted = slope * levels_arr + intercept
    details = {
        "rms_residual": float(np.sqrt(np.mean((var_arr - fitted) ** 2))),
        "clamped_read": bool(intercept < 0),
        "clamped_shot": bool(slope < 0),
        "bins_used": len(levels),
    }
    return max(0.0, float(intercept)), max(0.0, float(slope)), details


def estimate_noise(
    paired: Sequence[tuple[ChannelStack, ChannelStack]],
    *,
    bins: int = 16,
    min_count: int = 32,
    return_details: bool = False,
):
    """Per-channel noise regression over (noisy, clean) stack pairs."""
    if not paired:
        raise DomainError("need at least one (noisy, clean) stack pair")
    read = {}
    shot = {}
    details = {}
    for name in CHANNELS:
        plane_pairs = [
            (noisy.planes()[name], clean.planes()[name]) for noisy, clean in paired
        ]
        read[name], shot[name], details[name] = estimate_noise_plane(
            plane_pairs, bins=bins, min_count=min_count
        )
    params = NoiseParams(read, shot)
    if return_details:
        return params, details
    return params


def repeat_noise_calibration(
    generator: Callable[[int], Sequence[tuple[ChannelStack, ChannelStack]]],
    repeats: int,
    *,
    bins: int = 16,
    min_count: int = 32,
) -> CalibrationReport:
    """Run the noise regression on independently generated batches.

    ``generator(i)`` must return the paired data for batch ``i``. The report
    carries the per-parameter mean (as the working estimate) and spread,
    ready for per-image parameter sampling.
    """
    if repeats < 2:
        raise DomainError(f"repeats must be >= 2, got {repeats}")
    samples: dict[str, list[float]] = {}
    residuals: dict[str, list[float]] = {name: [] for name in CHANNELS}
    for index in range(repeats):
        params, details = estimate_noise(
            generator(index), bins=bins, min_count=min_count, return_details=True
        )
        for name in CHANNELS:
            samples.setdefault(f"lambda_read_{name.lower()}", []).append(params.lambda_read[name])
            samples.setdefault(f"lambda_shot_{name.lower()}", []).append(params.lambda_shot[name])
            residuals[name].append(details[name]["rms_residual"])
    def mean_std(values: list[float]) -> tuple[float, float]:
        # identical repeats must report exactly zero spread
        if all(v == values[0] for v in values):
            return values[0], 0.0
        return float(np.mean(values)), float(np.std(values, ddof=1))

    spread = {key: mean_std(values) for key, values in samples.items()}
    noise = NoiseParams(
        {name: spread[f"lambda_read_{name.lower()}"][0] for name in CHANNELS},
        {name: spread[f"lambda_shot_{name.lower()}"][0] for name in CHANNELS},
    )
    fit_residuals = {
        f"noise_{name.lower()}": float(np.mean(values)) for name, values in residuals.items()
    }
    return CalibrationReport(
        scale=None, noise=noise, noise_spread=spread, fit_residuals=fit_residuals
    )


# ---------------------------------------------------------------------------
# Frequency response
# ---------------------------------------------------------------------------

def render_sinusoid(shape: tuple[int, int], cycles: int, orientation: str) -> np.ndarray:
    """Unit-amplitude cosine chart: 0.5 + 0.5 * cos(2*pi*cycles*axis/size).

    "horizontal" modulates along columns (vertical bars), "vertical" along
    rows. A cosine puts a true extremum on the first sample, so sampled
    max/min are exact for odd cycle counts and at Nyquist.
    """
    if orientation not in ORIENTATIONS:
        raise DomainError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    rows, cols = shape
    if orientation == "horizontal":
        phase = 2.0 * np.pi * cycles * np.arange(cols) / cols
        return np.broadcast_to(0.5 + 0.5 * np.cos(phase), shape).copy()
    phase = 2.0 * np.pi * cycles * np.arange(rows) / rows
    return np.broadcast_to((0.5 + 0.5 * np.cos(phase))[:, None], shape).copy()


def _quantize_cycles(frequency: float, size: int) -> int:
    """Nearest renderable cycle count with dense sampled phases.

    Cycle counts coprime with the chart size make the sampled phase grid as
    fine as 2*pi/size, so the sampled extrema sit on the true sinusoid
    extrema (within (pi/size)^2/2) for any blur-induced phase shift. The
    Nyquist count on an even grid hits its extrema exactly and is kept.
    """
    target = int(round(frequency * size))
    target = max(1, min(target, size // 2))
    if size % 2 == 0 and target == size // 2:
        return target
    for offset in range(size):
        for candidate in (target - offset, target + offset):
            if 1 <= candidate <= size // 2 and math.gcd(candidate, size) == 1:
                return candidate
    raise DomainError(f"no usable cycle count near {target} for chart size {size}")


def measure_mtf(
    model: DegradationModel,
    frequencies: Sequence[float],
    orientation: str,
    *,
    chart_size: int = 256,
    channel: str = "G1",
) -> MtfCurve:
    """Contrast transfer measured with sinusoidal charts through the
    noiseless forward model (scaling and blur only).

    Requested frequencies (cycles/pixel) are quantized to grid harmonics;
    the curve records the frequencies actually rendered. Michelson contrast
    (max - min) / (max + min) is taken over the central half of the chart
    and normalized by the lowest-frequency value.
    """
    if orientation not in ORIENTATIONS:
        raise DomainError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    if not frequencies:
        raise DomainError("need at least one frequency")
    for f in frequencies:
        if not 0.0 < f <= 0.5:
            raise DomainError(f"frequency {f} outside (0, 0.5] cycles/pixel")
    kernel = model.psfs.for_channel(channel).kernel
    gamma = model.scale[channel]
    shape = (chart_size, chart_size)
    cycle_counts = sorted({_quantize_cycles(f, chart_size) for f in frequencies})
    # Measurement region: a centered band that spans the full modulation
    # axis (whole periods, so the sampled extrema are the true extrema) and
    # the central half of the invariant axis.
    lo = chart_size // 4
    hi = chart_size - lo
    contrasts = []
    for cycles in cycle_counts:
        chart = render_sinusoid(shape, cycles, orientation) * gamma
        blurred = convolve_plane(chart, kernel)
        region = blurred[lo:hi, :] if orientation == "horizontal" else blurred[:, lo:hi]
        peak, trough = float(region.max()), float(region.min())
        if peak + trough <= 0:
            raise DomainError("chart lost all signal; cannot form a contrast ratio")
        contrasts.append((peak - trough) / (peak + trough))
    reference = contrasts[0]
    if reference <= 0:
        raise DomainError("lowest-frequency contrast is zero; cannot normalize the curve")
    pairs = tuple(
        (cycles / chart_size, float(np.clip(c / reference, 0.0, 1.0)))
        for cycles, c in zip(cycle_counts, contrasts)
    )
    return MtfCurve({orientation: pairs})


# ---------------------------------------------------------------------------
# Reference-frame preparation
# ---------------------------------------------------------------------------

def average_frames(frames: Sequence[BayerRaw]) -> BayerRaw:
    """Per-sample arithmetic mean of repeated captures, then requantize."""
    if not frames:
        raise DomainError("need at least one frame")
    first = frames[0]
    for frame in frames[1:]:
        if frame.samples.shape != first.samples.shape:
            raise DimensionError(
                f"frame shape {frame.samples.shape} differs from {first.samples.shape}"
            )
        if frame.white_level != first.white_level:
            raise DomainError(
                f"white_level mismatch: {frame.white_level} vs {first.white_level}"
            )
    accum = np.zeros(first.samples.shape, dtype=np.float64)
    for frame in frames:
        accum += frame.samples
    mean = accum / (len(frames) * float(first.white_level))
    return BayerRaw(
        quantize(mean, first.white_level),
        black_level=first.black_level,
        white_level=first.white_level,
    )
