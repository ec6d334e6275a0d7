"""Image quality metrics and batch evaluation.

All metrics run on normalized [0, 1] values with dynamic range 1.0, for
both RGB renderings and single mosaic planes, so one convention covers the
whole pipeline. Identical inputs report infinite PSNR (the documented
sentinel) and SSIM 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy.signal import fftconvolve

from .errors import DimensionError, DomainError
from .raw import BayerRaw, RgbImage, load_image

ArrayLike = Union[np.ndarray, BayerRaw, RgbImage]


@dataclass(frozen=True)
class EvalReport:
    """Per-image metrics plus aggregates for a directory comparison."""

    entries: tuple[tuple[str, float, float], ...]  # (name, psnr_db, ssim)
    skipped: tuple[str, ...]
    mean_psnr: float
    mean_ssim: float
    count: int

    def __post_init__(self):
        if self.count != len(self.entries):
            raise DomainError("count must equal the number of evaluated pairs")
        for name, _, ssim_value in self.entries:
            if not -1.0 <= ssim_value <= 1.0:
                raise DomainError(f"{name}: ssim {ssim_value} outside [-1, 1]")


def _as_array(image: ArrayLike) -> np.ndarray:
    if isinstance(image, RgbImage):
        return image.channels
    if isinstance(image, BayerRaw):
        return image.samples.astype(np.float64) / float(image.white_level)
    return np.asarray(image, dtype=np.float64)


def psnr(a: ArrayLike, b: ArrayLike) -> float:
    """10*log10(1/MSE) over all values; identical inputs return +inf."""
    x = _as_array(a)
    y = _as_array(b)
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch: {x.shape} vs {y.shape}")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    window = np.outer(g, g)
    return window / window.sum()


def _ssim_plane(x: np.ndarray, y: np.ndarray, window: np.ndarray, c1: float, c2: float) -> float:
    mu_x = fftconvolve(x, window, mode="valid")
    mu_y = fftconvolve(y, window, mode="valid")
    xx = fftconvolve(x * x, window, mode="valid")
    yy = fftconvolve(y * y, window, mode="valid")
    xy = fftconvolve(x * y, window, mode="valid")
    var_x = xx - mu_x**2
    var_y = yy - mu_y**2
    cov = xy - mu_x * mu_y
    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    denominator = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(numerator / denominator))


def ssim(
    a: ArrayLike,
    b: ArrayLike,
    *,
    window_size: int = 11,
    sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
) -> float:
    """Mean local structural similarity with a Gaussian window.

    Defaults are the standard 11x11 window with sigma 1.5 and stabilizers
    K1=0.01, K2=0.03 at dynamic range 1.0. Multi-channel inputs average the
    per-channel scores.
    """
    x = _as_array(a)
    y = _as_array(b)
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.ndim == 2:
        planes = [(x, y)]
    elif x.ndim == 3:
        planes = [(x[..., i], y[..., i]) for i in range(x.shape[2])]
    else:
        raise DimensionError(f"expected 2-D or 3-D input, got {x.ndim}-D")
    h, w = planes[0][0].shape
    if h < window_size or w < window_size:
        raise DimensionError(
            f"image {h}x{w} is smaller than the {window_size}x{window_size} window"
        )
    window = _gaussian_window(window_size, sigma)
    c1 = (k1 * 1.0) ** 2
    c2 = (k2 * 1.0) ** 2
    return float(np.mean([_ssim_plane(px, py, window, c1, c2) for px, py in planes]))


def evaluate(pred_dir: str | Path, gt_dir: str | Path) -> EvalReport:
    """Metrics for every filename present in both directories.

    Pairs are compared in sorted filename order. Names present on one side
    only, or pairs whose image kinds differ, are recorded as skipped.
    """
    pred_dir = Path(pred_dir)
    gt_dir = Path(gt_dir)
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            raise DomainError(f"{d}: not a directory")
    pred_names = {p.name for p in pred_dir.iterdir() if p.suffix.lower() == ".png"}
    gt_names = {p.name for p in gt_dir.iterdir() if p.suffix.lower() == ".png"}
    skipped = sorted(pred_names.symmetric_difference(gt_names))
    entries = []
    for name in sorted(pred_names & gt_names):
        pred = load_image(pred_dir / name)
        gt = load_image(gt_dir / name)
        if type(pred) is not type(gt):
            skipped.append(name)
            continue
        entries.append((name, psnr(pred, gt), ssim(pred, gt)))
    if entries:
        mean_psnr = float(np.mean([p for _, p, _ in entries]))
        mean_ssim = float(np.mean([s for _, _, s in entries]))
    else:
        mean_psnr = math.nan
        mean_ssim = math.nan
    return EvalReport(
        entries=tuple(entries),
        skipped=tuple(sorted(skipped)),
        mean_psnr=mean_psnr,
        mean_ssim=mean_ssim,
        count=len(entries),
    )
