#!/usr/bin/env python3
"""Sweep channel noise levels and report estimator quality at each point.

Useful for checking how the pipeline degrades: DoA error and classification
accuracy as functions of shadowing and fading sigma.
"""

import argparse

from doateleop.trials import default_suite_specs, run_suite


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenario", default="default")
    ap.add_argument("--trials", type=int, default=4)
    ap.add_argument("--seed", type=int, default=300)
    ap.add_argument("--shadow", type=float, nargs="+", default=[0.0, 1.5, 3.0, 4.5])
    ap.add_argument("--fading", type=float, nargs="+", default=[0.0, 2.0, 4.0])
    args = ap.parse_args()

    print(f"{'shadow':>7s} {'fading':>7s} {'doa_err':>8s} {'accuracy':>8s} {'spec':>6s}")
    for sh in args.shadow:
        for fa in args.fading:
            noise = {"propagation": {"shadowing_sigma_db": sh, "fading_sigma_db": fa}}
            rep = run_suite(
                args.scenario,
                default_suite_specs(args.trials, base_seed=args.seed),
                noise=noise,
            )
            doa = rep.doa_mean_error_los()
            m = rep.mean_rates
            print(
                f"{sh:7.1f} {fa:7.1f} "
                f"{doa if doa is not None else float('nan'):8.3f} "
                f"{m.accuracy if m.accuracy is not None else float('nan'):8.3f} "
                f"{m.specificity if m.specificity is not None else float('nan'):6.3f}"
            )


if __name__ == "__main__":
    main()
