"""Command-line driver: psf, synth, calibrate, mtf, restore, eval.

Exit codes: 0 success, 2 argument/config parse errors, 3 file I/O errors,
4 domain errors (math preconditions), 1 evaluation completed with skipped
pairs. A one-line provenance header (version, seed, config digest) goes to
stderr before any work, and all output files are written atomically.

Every subcommand accepts ``--seed`` (default {DEFAULT_SEED}); subcommands
without randomness ignore it silently. Batch subcommands process files in
sorted filename order, and with a fixed seed the whole run is
byte-for-byte reproducible.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import __version__, calibrate as calibmod, configio, keyval, metrics as metricsmod
from .calibrate import CalibrationReport, IntensityPairSeries
from .configio import DEFAULT_SEED
from .degrade import NoiseParams, IntensityScale, add_noise, sample_noise_params, synthesize
from .errors import ConfigError, DomainError, ImageIoError, UdcError
from .optics import (
    OpticalConfig,
    Psf,
    PsfSet,
    load_display_pattern,
    load_psf_text,
    psf_set,
    save_psf_text,
)
from .patterns import constant_raw
from .raw import CHANNELS, load_raw, save_image, split_bayer
from .restore import RestoreParams, restore

__doc__ = __doc__.format(DEFAULT_SEED=DEFAULT_SEED)


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _require_file(path: str | Path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise ImageIoError(f"{path}: no such file")
    return path


def _require_dir(path: str | Path) -> Path:
    path = Path(path)
    if not path.is_dir():
        raise ImageIoError(f"{path}: no such directory")
    return path


def _input_files(path: str | Path) -> list[Path]:
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() == ".png")
        if not files:
            raise ImageIoError(f"{path}: no .png files found")
        return files
    return [_require_file(path)]


def _config_digest(paths: list[Path]) -> str:
    digest = hashlib.sha256()
    for path in paths:
        digest.update(path.read_bytes())
    return digest.hexdigest()[:12] if paths else "none"


def _provenance(args: argparse.Namespace) -> None:
    paths = []
    for attr in getattr(args, "config_attrs", ()):
        value = getattr(args, attr, None)
        if value and Path(value).is_file():
            paths.append(Path(value))
    seed = getattr(args, "seed", None)
    seed_text = str(seed) if seed is not None else "default"
    _log(f"udcsim {__version__} seed={seed_text} config={_config_digest(paths)}")


# ---------------------------------------------------------------------------
# psf
# ---------------------------------------------------------------------------

def _kernel_prefix(out: str) -> Path:
    path = Path(out)
    if path.suffix == ".txt":
        path = path.with_suffix("")
    return path


def _write_psf_files(psfs: PsfSet, out: str) -> dict[str, Path]:
    prefix = _kernel_prefix(out)
    written = {}
    for color, psf in (("r", psfs.r), ("g", psfs.g1), ("b", psfs.b)):
        path = prefix.parent / f"{prefix.name}_{color}.txt"
        save_psf_text(
            path,
            Psf(kernel=psf.kernel, channel=color.upper(), r=psf.r, wavelength_nm=psf.wavelength_nm),
        )
        written[color] = path
    return written


def _load_psf_files(prefix: str) -> PsfSet:
    base = _kernel_prefix(prefix)
    kernels = {}
    for color in ("r", "g", "b"):
        kernels[color] = load_psf_text(_require_file(base.parent / f"{base.name}_{color}.txt"))
    green = kernels["g"]
    return PsfSet(
        r=Psf(kernel=kernels["r"].kernel, channel="R", r=kernels["r"].r, wavelength_nm=kernels["r"].wavelength_nm),
        g1=Psf(kernel=green.kernel, channel="G1", r=green.r, wavelength_nm=green.wavelength_nm),
        g2=Psf(kernel=green.kernel, channel="G2", r=green.r, wavelength_nm=green.wavelength_nm),
        b=Psf(kernel=kernels["b"].kernel, channel="B", r=kernels["b"].r, wavelength_nm=kernels["b"].wavelength_nm),
    )


def _simulate_psfs(pattern_path: str, optics_path: str | None, tile: bool) -> PsfSet:
    pattern = load_display_pattern(_require_file(pattern_path))
    if optics_path:
        config = configio.load_optical_config(_require_file(optics_path))
    else:
        config = OpticalConfig()
    return psf_set(pattern, config, tile=tile)


def _cmd_psf(args: argparse.Namespace) -> int:
    psfs = _simulate_psfs(args.pattern, args.optics, args.tile)
    written = _write_psf_files(psfs, args.out)
    for color, path in written.items():
        _log(f"[psf] {color}: {path}")
    return 0


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def _cmd_synth(args: argparse.Namespace) -> int:
    spec = configio.load_model_spec(_require_file(args.model))
    files = _input_files(getattr(args, "in"))
    out_dir = Path(args.out)
    base_seed = args.seed if args.seed is not None else spec.model.seed
    has_spread = any(
        spec.noise_std.lambda_read[name] > 0 or spec.noise_std.lambda_shot[name] > 0
        for name in CHANNELS
    )
    for index, path in enumerate(files):
        clean = load_raw(path)
        noise = spec.model.noise
        if has_spread:
            rng = np.random.default_rng(np.random.SeedSequence([base_seed & 0xFFFFFFFFFFFFFFFF, index, 1]))
            noise = sample_noise_params(spec.model.noise, spec.noise_std, rng)
        model = dataclasses.replace(spec.model, noise=noise, seed=base_seed + index)
        degraded = synthesize(clean, model)
        out_path = out_dir / path.name
        save_image(out_path, degraded)
        _log(f"[synth] {path} -> {out_path}")
    return 0


# ---------------------------------------------------------------------------
# calibrate
# ---------------------------------------------------------------------------

def _self_calibrate(
    model_path: Path, repeats: int, chart_size: int, seed_override: int | None
) -> CalibrationReport:
    """Closed-loop calibration against a configured forward model.

    Gamma: a brightness sweep of flat fields pushed through the full model
    (blur preserves flat-field means, so the slope isolates the scaling).
    Noise: repeated flat-field batches, regressed per batch.
    """
    spec = configio.load_model_spec(model_path)
    model = spec.model
    if seed_override is not None:
        model = dataclasses.replace(model, seed=seed_override)
    # flat-field planes are half the chart; they must hold the blur kernels
    largest_kernel = max(
        model.psfs.for_channel(name).kernel.shape[0] for name in CHANNELS
    )
    chart_size = max(chart_size, 2 * (largest_kernel + largest_kernel % 2))
    levels = np.arange(0, 256, 10) / 255.0
    points = {name: [] for name in CHANNELS}
    for index, level in enumerate(levels):
        clean = constant_raw(chart_size, chart_size, float(level))
        degraded = synthesize(clean, dataclasses.replace(model, seed=model.seed + index))
        clean_stack = split_bayer(clean)
        degraded_stack = split_bayer(degraded)
        for name in CHANNELS:
            points[name].append(
                (float(clean_stack.planes()[name].mean()), float(degraded_stack.planes()[name].mean()))
            )
    series = IntensityPairSeries({name: np.array(pts) for name, pts in points.items()})
    scale, gamma_residuals = calibmod.estimate_gamma(series, return_residuals=True)

    noise_levels = (np.arange(16) + 0.5) / 16.0

    def batch(index: int):
        pairs = []
        for li, level in enumerate(noise_levels):
            clean_stack = split_bayer(constant_raw(chart_size, chart_size, float(level)))
            noisy_stack = add_noise(clean_stack, model.noise, model.seed + 7919 * (index + 1) + li)
            pairs.append((noisy_stack, clean_stack))
        return pairs

    noise_report = calibmod.repeat_noise_calibration(batch, repeats)
    residuals = {f"gamma_{name.lower()}": gamma_residuals[name] for name in CHANNELS}
    residuals.update(noise_report.fit_residuals)
    return CalibrationReport(
        scale=scale,
        noise=noise_report.noise,
        noise_spread=noise_report.noise_spread,
        fit_residuals=residuals,
    )


def _pairs_calibrate(args: argparse.Namespace) -> CalibrationReport:
    scale = None
    noise = None
    residuals: dict[str, float] = {}
    if args.gamma_clean and args.gamma_display:
        clean_dir = _require_dir(args.gamma_clean)
        display_dir = _require_dir(args.gamma_display)
        names = sorted(
            {p.name for p in clean_dir.iterdir() if p.suffix.lower() == ".png"}
            & {p.name for p in display_dir.iterdir() if p.suffix.lower() == ".png"}
        )
        if len(names) < 2:
            raise DomainError("gamma calibration needs at least two matched image pairs")
        points = {name: [] for name in CHANNELS}
        for name in names:
            clean_stack = split_bayer(load_raw(clean_dir / name))
            display_stack = split_bayer(load_raw(display_dir / name))
            for channel in CHANNELS:
                points[channel].append(
                    (
                        float(clean_stack.planes()[channel].mean()),
                        float(display_stack.planes()[channel].mean()),
                    )
                )
        series = IntensityPairSeries({c: np.array(p) for c, p in points.items()})
        scale, gamma_residuals = calibmod.estimate_gamma(series, return_residuals=True)
        residuals.update({f"gamma_{c.lower()}": gamma_residuals[c] for c in CHANNELS})
    if args.noise_noisy and args.noise_clean:
        noisy_dir = _require_dir(args.noise_noisy)
        clean_dir = _require_dir(args.noise_clean)
        names = sorted(
            {p.name for p in noisy_dir.iterdir() if p.suffix.lower() == ".png"}
            & {p.name for p in clean_dir.iterdir() if p.suffix.lower() == ".png"}
        )
        if not names:
            raise DomainError("noise calibration found no matched image pairs")
        pairs = [
            (split_bayer(load_raw(noisy_dir / name)), split_bayer(load_raw(clean_dir / name)))
            for name in names
        ]
        noise, details = calibmod.estimate_noise(pairs, return_details=True)
        residuals.update({f"noise_{c.lower()}": details[c]["rms_residual"] for c in CHANNELS})
    if scale is None and noise is None:
        raise ConfigError(
            "calibrate needs --model, or --gamma-clean/--gamma-display, "
            "or --noise-noisy/--noise-clean"
        )
    return CalibrationReport(scale=scale, noise=noise, fit_residuals=residuals)


def _cmd_calibrate(args: argparse.Namespace) -> int:
    if args.model:
        report = _self_calibrate(
            _require_file(args.model), args.repeats, args.chart_size, args.seed
        )
    else:
        report = _pairs_calibrate(args)
    configio.save_calibration_report(report, args.out)
    _log(f"[calibrate] report -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# mtf
# ---------------------------------------------------------------------------

def _cmd_mtf(args: argparse.Namespace) -> int:
    model = configio.load_degradation_model(_require_file(args.model))
    try:
        frequencies = [float(tok) for tok in args.frequencies.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --frequencies list: {exc}") from exc
    curves = {
        orientation: calibmod.measure_mtf(
            model, frequencies, orientation, chart_size=args.chart_size
        ).samples[orientation]
        for orientation in ("horizontal", "vertical")
    }
    lines = ["frequency_cycles_per_pixel,horizontal_contrast,vertical_contrast"]
    for (freq, horiz), (_, vert) in zip(curves["horizontal"], curves["vertical"]):
        lines.append(f"{freq:.6f},{horiz:.6f},{vert:.6f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        keyval.atomic_write_bytes(args.out, text.encode())
        _log(f"[mtf] curve -> {args.out}")
    else:
        print(text, end="")
    return 0


# ---------------------------------------------------------------------------
# restore
# ---------------------------------------------------------------------------

def _gamma_from_args(args: argparse.Namespace) -> IntensityScale:
    if args.report:
        report = configio.load_calibration_report(_require_file(args.report))
        if report.scale is None:
            raise ConfigError(f"{args.report}: report carries no gamma values")
        return report.scale
    if args.gamma:
        try:
            parts = [float(tok) for tok in args.gamma.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad --gamma list: {exc}") from exc
        if len(parts) == 3:
            return IntensityScale.from_rgb(*parts)
        if len(parts) == 4:
            return IntensityScale(dict(zip(CHANNELS, parts)))
        raise ConfigError("--gamma needs 3 (r,g,b) or 4 (r,g1,g2,b) values")
    raise ConfigError("restore needs --gamma or --report")


def _noise_from_args(args: argparse.Namespace) -> NoiseParams | None:
    if not args.auto_nsr:
        return None
    if not args.report:
        raise ConfigError("--auto-nsr needs --report with calibrated noise parameters")
    report = configio.load_calibration_report(_require_file(args.report))
    if report.noise is None:
        raise ConfigError(f"{args.report}: report carries no noise parameters")
    return report.noise


def _cmd_restore(args: argparse.Namespace) -> int:
    if args.psf:
        psfs = _load_psf_files(args.psf)
    elif args.pattern:
        psfs = _simulate_psfs(args.pattern, args.optics, args.tile)
    else:
        raise ConfigError("restore needs --psf PREFIX or --pattern (with optional --optics)")
    scale = _gamma_from_args(args)
    params = RestoreParams(
        denoise_strength=args.denoise_strength,
        nsr=args.nsr,
        auto_nsr=args.auto_nsr,
        noise=_noise_from_args(args),
        denoiser_command=args.denoiser_cmd,
    )
    files = _input_files(getattr(args, "in"))
    out_dir = Path(args.out)
    for path in files:
        degraded = load_raw(path)
        restored = restore(degraded, psfs, scale, params)
        out_path = out_dir / path.name
        save_image(out_path, restored)
        _log(f"[restore] {path} -> {out_path}")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _format_report(report) -> tuple[str, str]:
    width = max([len(name) for name, _, _ in report.entries] + [len("name"), len("mean")])
    text_lines = [f"{'name':<{width}}  {'psnr_db':>10}  {'ssim':>8}"]
    csv_lines = ["name,psnr_db,ssim"]
    for name, psnr_value, ssim_value in report.entries:
        text_lines.append(f"{name:<{width}}  {psnr_value:>10.4f}  {ssim_value:>8.5f}")
        csv_lines.append(f"{name},{psnr_value:.6f},{ssim_value:.6f}")
    text_lines.append(
        f"{'mean':<{width}}  {report.mean_psnr:>10.4f}  {report.mean_ssim:>8.5f}"
        f"  (n={report.count}, skipped={len(report.skipped)})"
    )
    csv_lines.append(f"mean,{report.mean_psnr:.6f},{report.mean_ssim:.6f}")
    for name in report.skipped:
        text_lines.append(f"{name:<{width}}  {'skipped':>10}")
        csv_lines.append(f"{name},skipped,skipped")
    return "\n".join(text_lines) + "\n", "\n".join(csv_lines) + "\n"


def _cmd_eval(args: argparse.Namespace) -> int:
    report = metricsmod.evaluate(_require_dir(args.pred), _require_dir(args.gt))
    text, csv = _format_report(report)
    print(text, end="")
    if args.out:
        out = Path(args.out)
        keyval.atomic_write_bytes(out.with_suffix(".txt"), text.encode())
        keyval.atomic_write_bytes(out.with_suffix(".csv"), csv.encode())
        _log(f"[eval] report -> {out.with_suffix('.txt')} / {out.with_suffix('.csv')}")
    return 1 if report.skipped else 0


# ---------------------------------------------------------------------------
# parser / dispatch
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="udcsim",
        description="Under-display camera degradation simulator and restorer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_seed(p):
        p.add_argument(
            "--seed", type=int, default=None,
            help="reproducibility seed; overrides the model seed where one "
                 f"applies (built-in default {DEFAULT_SEED})",
        )

    p_psf = sub.add_parser("psf", help="simulate per-channel blur kernels from a display pattern")
    p_psf.add_argument("--pattern", required=True, help="display pattern PNG (+ .meta sidecar)")
    p_psf.add_argument("--optics", help="optics config file (defaults when omitted)")
    p_psf.add_argument("--tile", action="store_true", help="treat the pattern as a periodic unit cell")
    p_psf.add_argument("--out", required=True, help="output prefix; writes <prefix>_{r,g,b}.txt")
    add_seed(p_psf)
    p_psf.set_defaults(func=_cmd_psf, config_attrs=("optics",))

    p_synth = sub.add_parser("synth", help="apply the forward degradation model to clean mosaics")
    p_synth.add_argument("--in", required=True, help="clean mosaic PNG or directory")
    p_synth.add_argument("--model", required=True, help="degradation model config file")
    p_synth.add_argument("--out", required=True, help="output directory")
    add_seed(p_synth)
    p_synth.set_defaults(func=_cmd_synth, config_attrs=("model",))

    p_cal = sub.add_parser("calibrate", help="recover model parameters from pairs or a model file")
    p_cal.add_argument("--model", help="self-calibrate against this model config")
    p_cal.add_argument("--gamma-clean", help="directory of display-free mosaics")
    p_cal.add_argument("--gamma-display", help="directory of display-covered mosaics (matched names)")
    p_cal.add_argument("--noise-noisy", help="directory of noisy mosaics")
    p_cal.add_argument("--noise-clean", help="directory of matching noise-free mosaics")
    p_cal.add_argument("--repeats", type=int, default=100, help="noise calibration repeats (model mode)")
    p_cal.add_argument("--chart-size", type=int, default=64, help="flat-field chart size (model mode)")
    p_cal.add_argument("--out", required=True, help="calibration report output file")
    add_seed(p_cal)
    p_cal.set_defaults(func=_cmd_calibrate, config_attrs=("model",))

    p_mtf = sub.add_parser("mtf", help="measure the contrast transfer of a configured model")
    p_mtf.add_argument("--model", required=True, help="degradation model config file")
    p_mtf.add_argument(
        "--frequencies",
        default="0.05,0.10,0.15,0.20,0.25,0.30,0.35,0.40,0.45",
        help="comma-separated frequencies in cycles/pixel, each in (0, 0.5]",
    )
    p_mtf.add_argument("--chart-size", type=int, default=256)
    p_mtf.add_argument("--out", help="CSV output path (stdout when omitted)")
    add_seed(p_mtf)
    p_mtf.set_defaults(func=_cmd_mtf, config_attrs=("model",))

    p_res = sub.add_parser("restore", help="restore degraded mosaics to RGB")
    p_res.add_argument("--in", required=True, help="degraded mosaic PNG or directory")
    p_res.add_argument("--psf", help="kernel file prefix from the psf subcommand")
    p_res.add_argument("--pattern", help="display pattern PNG (simulate kernels on the fly)")
    p_res.add_argument("--optics", help="optics config for --pattern")
    p_res.add_argument("--tile", action="store_true", help="tile the pattern across the aperture")
    p_res.add_argument("--gamma", help="scaling factors r,g,b or r,g1,g2,b")
    p_res.add_argument("--report", help="calibration report (gamma + noise source)")
    p_res.add_argument("--nsr", type=float, default=0.0, help="Wiener noise-to-signal ratio")
    p_res.add_argument("--auto-nsr", action="store_true",
                       help="derive nsr per channel from calibrated noise (needs --report)")
    p_res.add_argument("--denoise-strength", type=float, default=0.0)
    p_res.add_argument("--denoiser-cmd", help="external denoiser executable (in.npy out.npy strength)")
    p_res.add_argument("--out", required=True, help="output directory for 8-bit RGB files")
    add_seed(p_res)
    p_res.set_defaults(func=_cmd_restore, config_attrs=("optics", "report"))

    p_eval = sub.add_parser("eval", help="compare two directories of matching images")
    p_eval.add_argument("--pred", required=True, help="directory of predictions")
    p_eval.add_argument("--gt", required=True, help="directory of references")
    p_eval.add_argument("--out", help="report prefix; writes <prefix>.txt and <prefix>.csv")
    add_seed(p_eval)
    p_eval.set_defaults(func=_cmd_eval, config_attrs=())

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        _provenance(args)
        return args.func(args)
    except ConfigError as exc:
        _log(f"error: {exc}")
        return 2
    except ImageIoError as exc:
        _log(f"error: {exc}")
        return 3
    except OSError as exc:
        _log(f"error: {exc}")
        return 3
    except DomainError as exc:
        _log(f"error: {exc}")
        return 4
    except UdcError as exc:
        _log(f"error: {exc}")
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
