"""Loaders and writers for the plain-text configuration schema.

Optics config keys (units in the names):

    aperture_diameter_um, focal_length_um, sensor_pitch_um,
    wavelength_r_nm, wavelength_g_nm, wavelength_b_nm,
    r_override_r, r_override_g, r_override_b   (optional)
    min_energy                                  (optional kernel truncation)
    pattern_tile                                (optional, bool)

Degradation-model config adds:

    gamma_r, gamma_g, gamma_b        (or gamma_g1 / gamma_g2 split)
    lambda_read, lambda_shot         (shared; *_r/_g1/_g2/_b override)
    lambda_read_std, lambda_shot_std (optional per-image sampling spread)
    seed
    psf_r, psf_g, psf_b              (kernel text files)  -- or --
    pattern                          (display pattern image + sidecar)

Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from . import keyval
from .calibrate import CalibrationReport
from .degrade import DegradationModel, NoiseParams, IntensityScale
from .errors import ConfigError
from .optics import (
    OpticalConfig,
    Psf,
    PsfSet,
    load_display_pattern,
    load_psf_text,
    psf_set,
)
from .raw import CHANNELS

DEFAULT_SEED = 1729


def parse_optical_config(pairs: dict[str, str], source: str) -> OpticalConfig:
    wavelengths = {
        "R": keyval.get_float(pairs, "wavelength_r_nm", 640.0, source=source),
        "G": keyval.get_float(pairs, "wavelength_g_nm", 520.0, source=source),
        "B": keyval.get_float(pairs, "wavelength_b_nm", 450.0, source=source),
    }
    override = {}
    for color in ("r", "g", "b"):
        key = f"r_override_{color}"
        if key in pairs:
            override[color.upper()] = keyval.get_float(pairs, key, source=source)
    return OpticalConfig(
        aperture_diameter_um=keyval.get_float(pairs, "aperture_diameter_um", 3333.0, source=source),
        focal_length_um=keyval.get_float(pairs, "focal_length_um", 6000.0, source=source),
        sensor_pitch_um=keyval.get_float(pairs, "sensor_pitch_um", 3.1, source=source),
        wavelengths_nm=wavelengths,
        r_override=override or None,
    )


def load_optical_config(path: str | Path) -> OpticalConfig:
    path = Path(path)
    return parse_optical_config(keyval.load(path), str(path))


def _resolve(base: Path, value: str) -> Path:
    candidate = Path(value)
    return candidate if candidate.is_absolute() else base / candidate


def _psfs_from_pairs(pairs: dict[str, str], source: str, base: Path) -> PsfSet:
    if "pattern" in pairs:
        pattern = load_display_pattern(_resolve(base, pairs["pattern"]))
        config = parse_optical_config(pairs, source)
        tile = keyval.get_bool(pairs, "pattern_tile", False, source=source)
        min_energy = keyval.get_float(pairs, "min_energy", 0.9999, source=source)
        return psf_set(pattern, config, tile=tile, min_energy=min_energy)
    if all(f"psf_{c}" in pairs for c in ("r", "g", "b")):
        kernels = {
            color: load_psf_text(_resolve(base, pairs[f"psf_{color}"]))
            for color in ("r", "g", "b")
        }
        green = kernels["g"]
        return PsfSet(
            r=_retag(kernels["r"], "R"),
            g1=_retag(green, "G1"),
            g2=_retag(green, "G2"),
            b=_retag(kernels["b"], "B"),
        )
    raise ConfigError(
        f"{source}: need either 'pattern' (plus optics keys) or psf_r/psf_g/psf_b kernel files"
    )


def _retag(psf: Psf, channel: str) -> Psf:
    return Psf(kernel=psf.kernel, channel=channel, r=psf.r, wavelength_nm=psf.wavelength_nm)


def _gamma_from_pairs(pairs: dict[str, str], source: str) -> IntensityScale:
    shared_g = keyval.get_float(pairs, "gamma_g", None, source=source)
    gamma = {
        "R": keyval.get_float(pairs, "gamma_r", source=source),
        "G1": keyval.get_float(pairs, "gamma_g1", shared_g, source=source),
        "G2": keyval.get_float(pairs, "gamma_g2", shared_g, source=source),
        "B": keyval.get_float(pairs, "gamma_b", source=source),
    }
    for name, value in gamma.items():
        if value is None:
            raise ConfigError(f"{source}: missing gamma for channel {name}")
    return IntensityScale(gamma)


def _noise_from_pairs(pairs: dict[str, str], source: str, suffix: str = "") -> NoiseParams:
    shared_read = keyval.get_float(pairs, f"lambda_read{suffix}", 0.0, source=source)
    shared_shot = keyval.get_float(pairs, f"lambda_shot{suffix}", 0.0, source=source)
    read = {}
    shot = {}
    for name in CHANNELS:
        tag = name.lower()
        read[name] = keyval.get_float(pairs, f"lambda_read{suffix}_{tag}", shared_read, source=source)
        shot[name] = keyval.get_float(pairs, f"lambda_shot{suffix}_{tag}", shared_shot, source=source)
    return NoiseParams(read, shot)


@dataclass(frozen=True)
class ModelSpec:
    """Parsed model config: the model plus optional per-image noise spread."""

    model: DegradationModel
    noise_std: NoiseParams


def load_model_spec(path: str | Path) -> ModelSpec:
    path = Path(path)
    pairs = keyval.load(path)
    source = str(path)
    model = DegradationModel(
        scale=_gamma_from_pairs(pairs, source),
        psfs=_psfs_from_pairs(pairs, source, path.parent),
        noise=_noise_from_pairs(pairs, source),
        seed=keyval.get_int(pairs, "seed", DEFAULT_SEED, source=source),
    )
    return ModelSpec(model=model, noise_std=_noise_from_pairs(pairs, source, suffix="_std"))


def load_degradation_model(path: str | Path) -> DegradationModel:
    return load_model_spec(path).model


# ---------------------------------------------------------------------------
# Calibration reports
# ---------------------------------------------------------------------------

def save_calibration_report(report: CalibrationReport, path: str | Path) -> None:
    pairs: dict[str, object] = {}
    if report.scale is not None:
        for name in CHANNELS:
            pairs[f"gamma_{name.lower()}"] = repr(report.scale[name])
    if report.noise is not None:
        for name in CHANNELS:
            pairs[f"lambda_read_{name.lower()}"] = repr(report.noise.lambda_read[name])
            pairs[f"lambda_shot_{name.lower()}"] = repr(report.noise.lambda_shot[name])
    if report.noise_spread:
        for key, (mean, std) in sorted(report.noise_spread.items()):
            pairs[f"{key}_mean"] = repr(mean)
            pairs[f"{key}_std"] = repr(std)
    for key, value in sorted(report.fit_residuals.items()):
        pairs[f"residual_{key}"] = repr(value)
    keyval.dump(pairs, path, header="calibration report")


def load_calibration_report(path: str | Path) -> CalibrationReport:
    path = Path(path)
    pairs = keyval.load(path)
    source = str(path)
    scale = None
    if all(f"gamma_{name.lower()}" in pairs for name in CHANNELS):
        scale = IntensityScale(
            {name: keyval.get_float(pairs, f"gamma_{name.lower()}", source=source) for name in CHANNELS}
        )
    noise = None
    if all(f"lambda_read_{name.lower()}" in pairs for name in CHANNELS):
        noise = NoiseParams(
            {name: keyval.get_float(pairs, f"lambda_read_{name.lower()}", source=source) for name in CHANNELS},
            {name: keyval.get_float(pairs, f"lambda_shot_{name.lower()}", source=source) for name in CHANNELS},
        )
    spread = {}
    for key in pairs:
        if key.endswith("_mean") and key.startswith("lambda_"):
            base = key[: -len("_mean")]
            if f"{base}_std" in pairs:
                spread[base] = (
                    keyval.get_float(pairs, key, source=source),
                    keyval.get_float(pairs, f"{base}_std", source=source),
                )
    residuals = {
        key[len("residual_") :]: keyval.get_float(pairs, key, source=source)
        for key in pairs
        if key.startswith("residual_")
    }
    return CalibrationReport(
        scale=scale, noise=noise, noise_spread=spread or None, fit_residuals=residuals
    )
