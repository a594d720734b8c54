"""Repeat the benchmark over many seeds to see how stable the ablation ordering
and the conflict uncertainty gap are (a single seed says little at n=300)."""
import argparse

import numpy as np

from etscl.contrastive import EncoderConfig
from etscl.nn import ClassifierConfig
from etscl.pipeline import run_benchmark
from etscl.synthdata import DatasetSpec


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--head-lr", type=float, default=ClassifierConfig.lr)
    args = ap.parse_args()

    rows = []
    for seed in range(1, args.seeds + 1):
        res = run_benchmark(DatasetSpec(seed=seed), EncoderConfig(seed=seed),
                            ClassifierConfig(seed=seed, lr=args.head_lr))
        bk = res.test.branch_kappa
        best = max(bk["cfp"], bk["oct"], bk["vessel"])
        gap = res.conflict_uncertainty - res.clean_uncertainty
        rows.append((res.test.kappa, best, res.test.kappa >= bk["cfp+oct"] - 0.02, gap))
        print(f"seed {seed:3d}  fused {res.test.kappa:.3f}  best single {best:.3f}  "
              f"cfp+oct {bk['cfp+oct']:.3f}  u gap {gap:+.4f}", flush=True)
    fused, best, pair_ok, gap = map(np.array, zip(*rows))
    print(f"\nmean fused kappa {fused.mean():.3f}, mean best single {best.mean():.3f}")
    print(f"fused > every single head: {np.mean(fused > best):.0%}")
    print(f"fused >= cfp+oct - 0.02:   {pair_ok.mean():.0%}")
    print(f"u gap > 0:                 {np.mean(gap > 0):.0%}  (mean {gap.mean():+.4f}, sd {gap.std(ddof=1):.4f})")


if __name__ == "__main__":
    main()
