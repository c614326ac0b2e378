"""Preservation/edit-strength tradeoff over K and beta on the layout toy.

    python3 scripts/tradeoff_sweep.py --out results/tradeoff.csv
"""
import argparse
import csv
from pathlib import Path

from latalign.denoiser import GuidanceConfig
from latalign.experiments import ToyBench, sweep_beta, sweep_K
from latalign.metrics import spearman


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("results/tradeoff.csv"))
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--guidance", type=float, default=3.0)
    p.add_argument("--K", type=int, nargs="+", default=[0, 100, 200, 300, 400, 500, 600, 700])
    p.add_argument("--beta", type=float, nargs="+", default=[0.0, 0.05, 0.1, 0.2, 0.3, 0.35, 0.4, 0.5])
    args = p.parse_args()

    bench = ToyBench(guidance=GuidanceConfig(args.guidance), n_seeds=args.seeds)
    k_rows = sweep_K(bench, args.K)
    b_rows = sweep_beta(bench, args.beta)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sweep", "K", "beta", "mse_mean", "strength_mean"])
        for K, (m, s) in zip(args.K, k_rows):
            w.writerow(["K", K, 0.3, repr(m), repr(s)])
        for b, (m, s) in zip(args.beta, b_rows):
            w.writerow(["beta", 200, b, repr(m), repr(s)])
    print(f"K sweep:    rho(mse)={spearman(args.K, [r[0] for r in k_rows]):+.3f} "
          f"rho(strength)={spearman(args.K, [r[1] for r in k_rows]):+.3f}")
    print(f"beta sweep: rho(mse)={spearman(args.beta, [r[0] for r in b_rows]):+.3f} "
          f"rho(strength)={spearman(args.beta, [r[1] for r in b_rows]):+.3f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
