#!/usr/bin/env python3
"""Run the 8-trial calibrated-noise suite and print the rates table.

This is the headless counterpart of the quantitative evaluation: eight
scripted missions (gradient-follower and waypoint pilots alternating) on the
default maze, aggregated into sensitivity / specificity / precision /
accuracy plus the pooled DoA error in line-of-sight cells.
"""

import argparse
import json

from doateleop.trials import default_suite_specs, run_suite


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenario", default="default")
    ap.add_argument("--seed", type=int, default=300)
    ap.add_argument("--trials", type=int, default=8)
    ap.add_argument("--noise", choices=("default", "off"), default="default")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()

    report = run_suite(
        args.scenario,
        default_suite_specs(args.trials, base_seed=args.seed),
        noise=args.noise,
        workers=args.workers,
    )
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        print(report.to_table())


if __name__ == "__main__":
    main()
