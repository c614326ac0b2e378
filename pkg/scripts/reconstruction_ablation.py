"""Reconstruction error of every alignment mode at K=0, beta=1.

The literal epsilon rule is included to show why it is not used for exact
reconstruction: it blends noise estimates without the scaling that makes the
x0 prediction land on the reference.

    python3 scripts/reconstruction_ablation.py
"""
import argparse

import numpy as np

from latalign.alignment import MODES
from latalign.denoiser import GaussianMixtureDenoiser, GuidanceConfig
from latalign.editor import run_reconstruction
from latalign.grid import RngStream
from latalign.presets import layout_spec, separated_1d_spec, three_component_1d_spec
from latalign.schedule import build_schedule


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--steps", type=int, default=50)
    args = p.parse_args()

    schedule = build_schedule(1000, "linear-beta", args.steps)
    specs = {"layout": layout_spec(shape=(4, 4), class_offset=1.5, variance=0.04),
             "separated-1d": separated_1d_spec(), "three-component": three_component_1d_spec()}
    print(f"{'spec':<16} " + " ".join(f"{m:>15}" for m in MODES if m != "none"))
    for name, spec in specs.items():
        model = GaussianMixtureDenoiser(spec)
        cells = []
        for mode in (m for m in MODES if m != "none"):
            worst = 0.0
            for seed in range(args.seeds):
                ref = spec.sample(RngStream(seed))
                out = run_reconstruction(ref, model, schedule, mode=mode, seed=seed, target=spec.classes[-1],
                                         guidance=GuidanceConfig(10.0))
                worst = max(worst, float(np.max(np.abs(out - ref))))
            cells.append(f"{worst:>15.3e}")
        print(f"{name:<16} " + " ".join(cells))


if __name__ == "__main__":
    main()
