"""Whole-workflow exercise through the CLI: kernels, synthesis, calibration,
restoration, evaluation, all through the documented file formats."""

import numpy as np
import pytest

from udcsim.cli import main
from udcsim.optics import save_display_pattern
from udcsim.patterns import stripe_pattern, synthetic_scene_raw
from udcsim.raw import load_raw, save_image
from udcsim.restore import demosaic_bilinear

from test_cli import MODEL_CFG, OPTICS_CFG, PATTERN_SIZE, PITCH_UM


@pytest.fixture
def workflow_dir(tmp_path):
    save_display_pattern(
        tmp_path / "stripes.png",
        stripe_pattern(PATTERN_SIZE, PITCH_UM, period=32, open_fraction=0.21),
    )
    (tmp_path / "model.cfg").write_text(MODEL_CFG)
    (tmp_path / "optics.cfg").write_text(OPTICS_CFG)
    clean = tmp_path / "clean"
    clean.mkdir()
    for index in range(4):
        save_image(clean / f"img_{index:03d}.png", synthetic_scene_raw(64, 64, seed=20 + index))
    return tmp_path


def mean_psnr_from_csv(path) -> float:
    for line in path.read_text().splitlines():
        if line.startswith("mean,"):
            return float(line.split(",")[1])
    raise AssertionError(f"no mean row in {path}")


def test_full_cli_workflow(workflow_dir):
    ws = workflow_dir

    assert main([
        "psf", "--pattern", str(ws / "stripes.png"),
        "--optics", str(ws / "optics.cfg"), "--out", str(ws / "kernels"),
    ]) == 0

    assert main([
        "synth", "--in", str(ws / "clean"),
        "--model", str(ws / "model.cfg"), "--out", str(ws / "degraded"),
    ]) == 0

    assert main([
        "calibrate", "--model", str(ws / "model.cfg"),
        "--repeats", "4", "--chart-size", "64", "--out", str(ws / "report.cfg"),
    ]) == 0

    assert main([
        "restore", "--in", str(ws / "degraded"),
        "--psf", str(ws / "kernels"),
        "--report", str(ws / "report.cfg"), "--auto-nsr",
        "--denoise-strength", "0.01",
        "--out", str(ws / "restored"),
    ]) == 0

    # references and a no-restoration baseline, via the library
    for sub in ("reference", "baseline"):
        (ws / sub).mkdir()
    for path in sorted((ws / "clean").glob("*.png")):
        save_image(ws / "reference" / path.name, demosaic_bilinear(load_raw(path)))
    for path in sorted((ws / "degraded").glob("*.png")):
        save_image(ws / "baseline" / path.name, demosaic_bilinear(load_raw(path)))

    assert main([
        "eval", "--pred", str(ws / "restored"), "--gt", str(ws / "reference"),
        "--out", str(ws / "restored_report"),
    ]) == 0
    assert main([
        "eval", "--pred", str(ws / "baseline"), "--gt", str(ws / "reference"),
        "--out", str(ws / "baseline_report"),
    ]) == 0

    restored_psnr = mean_psnr_from_csv(ws / "restored_report.csv")
    baseline_psnr = mean_psnr_from_csv(ws / "baseline_report.csv")
    assert np.isfinite(restored_psnr) and np.isfinite(baseline_psnr)
    assert restored_psnr > baseline_psnr
