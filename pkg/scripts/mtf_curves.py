#!/usr/bin/env python3
"""Contrast-transfer comparison of the two display layouts.

Measures horizontal and vertical MTF curves for the stripe-grating and
perforated-matrix models and writes one CSV per model. With --plot also
saves a PNG figure (requires matplotlib).

    python3 scripts/mtf_curves.py --out mtf_out --plot
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from udcsim.calibrate import measure_mtf

from run_pipeline_demo import build_models


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="mtf_out")
    parser.add_argument("--points", type=int, default=12)
    parser.add_argument("--chart-size", type=int, default=256)
    parser.add_argument("--plot", action="store_true")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    frequencies = list(np.linspace(0.02, 0.48, args.points))
    curves = {}
    for name, model in build_models(seed=7).items():
        horizontal = measure_mtf(
            model, frequencies, "horizontal", chart_size=args.chart_size
        ).samples["horizontal"]
        vertical = measure_mtf(
            model, frequencies, "vertical", chart_size=args.chart_size
        ).samples["vertical"]
        curves[name] = (horizontal, vertical)
        path = out / f"mtf_{name}.csv"
        lines = ["frequency_cycles_per_pixel,horizontal_contrast,vertical_contrast"]
        for (freq, h), (_, v) in zip(horizontal, vertical):
            lines.append(f"{freq:.6f},{h:.6f},{v:.6f}")
        path.write_text("\n".join(lines) + "\n")
        print(f"{name}: wrote {path}")
        mid_h = min(h for f, h in horizontal if 0.1 <= f <= 0.4)
        mid_v = min(v for f, v in vertical if 0.1 <= f <= 0.4)
        print(f"  mid-band minimum contrast: horizontal {mid_h:.3f}, vertical {mid_v:.3f}")

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, axes = plt.subplots(1, len(curves), figsize=(6 * len(curves), 4), squeeze=False)
        for ax, (name, (horizontal, vertical)) in zip(axes[0], curves.items()):
            ax.plot(*zip(*horizontal), marker="o", label="horizontal")
            ax.plot(*zip(*vertical), marker="s", label="vertical")
            ax.set_title(name)
            ax.set_xlabel("frequency (cycles/pixel)")
            ax.set_ylabel("contrast (normalized)")
            ax.set_ylim(0, 1.05)
            ax.grid(alpha=0.3)
            ax.legend()
        fig.tight_layout()
        fig.savefig(out / "mtf_curves.png", dpi=150)
        print(f"wrote {out / 'mtf_curves.png'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
