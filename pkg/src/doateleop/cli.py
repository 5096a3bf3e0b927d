"""Command line entry point.

Subcommands: run one scripted trial, run the evaluation suite, evaluate a
saved log, serve a live session, replay a log over the wire, or dump an RSS
heatmap grid. Flag defaults can be overridden with DOATELEOP_* environment
variables (e.g. DOATELEOP_HOST, DOATELEOP_PORT, DOATELEOP_SCENARIO).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from .evaluation import EvalConfig, eval_samples, trial_metrics, write_eval_csv
from .pilots import make_pilot
from .session import ScenarioFormatError, apply_noise_mode, load_scenario
from .triallog import LogError, read_log, write_log
from .trials import DEFAULT_ROUTES, default_suite_specs, run_suite, run_trial

ENV_PREFIX = "DOATELEOP_"


def _env(name: str, default):
    return os.environ.get(ENV_PREFIX + name, default)


def _noise_arg(value: str):
    if value in ("off", "default"):
        return value
    return json.loads(Path(value).read_text(encoding="utf-8"))


def _load(scenario_ref: str, noise: str):
    scenario = load_scenario(scenario_ref)
    return apply_noise_mode(scenario, _noise_arg(noise))


def _emit(doc: dict, fmt: str, out: str | None, table_text: str | None = None) -> None:
    if fmt == "table" and table_text is not None:
        text = table_text
    elif fmt == "csv":
        # flat key,value rows; nested values serialized as JSON
        lines = ["key,value"]
        for k, v in doc.items():
            lines.append(f"{k},{json.dumps(v)}")
        text = "\n".join(lines)
    else:
        text = json.dumps(doc, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def cmd_run(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario, args.noise)
    params = json.loads(args.pilot_params) if args.pilot_params else {}
    if args.pilot == "waypoint" and "waypoints" not in params:
        params["waypoints"] = DEFAULT_ROUTES[args.route]
    pilot = make_pilot(args.pilot, seed=args.seed, **params)
    log, report = run_trial(scenario, pilot, seed=args.seed)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_log(log, out_dir / "trial.ndjson")
        _emit(report.to_dict(), "json", str(out_dir / "report.json"))
        if args.samples_csv:
            write_eval_csv(eval_samples(log), out_dir / "samples.csv")
        print(f"wrote {out_dir}/trial.ndjson and report.json")
    else:
        _emit(report.to_dict(), args.format, None)
    return 0 if report.status in ("TIMEOUT", "SIGNAL_LOST") else 1


def cmd_suite(args: argparse.Namespace) -> int:
    specs = default_suite_specs(args.trials, base_seed=args.seed)
    report = run_suite(
        args.scenario, specs, noise=_noise_arg(args.noise), workers=args.workers
    )
    doc = report.to_dict()
    _emit(doc, args.format, args.out, table_text=report.to_table())
    if report.failures:
        for name, err in report.failures:
            print(f"trial {name} failed: {err}", file=sys.stderr)
        return 1
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        log = read_log(args.log)
    except LogError as exc:
        print(f"cannot read log: {exc}", file=sys.stderr)
        return 1
    cfg = None
    if args.tau is not None:
        cfg = EvalConfig(
            tau=args.tau,
            sample_interval=log.header["config"]["rss_interval_s"],
            derivative_source=log.header["config"].get("derivative_source", "filtered"),
        )
    report = trial_metrics(log, cfg)
    _emit(report.to_dict(), args.format, args.out)
    if args.samples_csv:
        write_eval_csv(eval_samples(log, cfg), args.samples_csv)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .server import create_app, run_server

    app = create_app(
        scenario_dirs=args.scenario_dir,
        debug=args.debug,
        frontend_dir=args.frontend,
    )
    print(f"serving live sessions on ws://{args.host}:{args.port}/session")
    if args.frontend:
        print(f"operator console at http://{args.host}:{args.port}/")
    run_server(app, host=args.host, port=args.port)
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    from .server import create_app, run_server

    try:
        log = read_log(args.log)
    except LogError as exc:
        print(f"refusing to replay: {exc}", file=sys.stderr)
        return 1
    app = create_app(replay_log=log)
    print(f"replaying {args.log} on ws://{args.host}:{args.port}/session")
    run_server(app, host=args.host, port=args.port)
    return 0


def cmd_map_probe(args: argparse.Namespace) -> int:
    scenario = _load(args.scenario, args.noise)
    field = scenario.build_field(args.seed)
    (xmin, ymin), (xmax, ymax) = field.bounds
    nx = max(int((xmax - xmin) / args.resolution), 1)
    ny = max(int((ymax - ymin) / args.resolution), 1)
    rows = []
    for j in range(ny + 1):
        y = ymin + j * (ymax - ymin) / ny
        row = []
        for i in range(nx + 1):
            x = xmin + i * (xmax - xmin) / nx
            row.append(round(field.rss_at((x, y), args.time), 2))
        rows.append(row)
    if args.format == "csv":
        text = "\n".join(",".join(str(v) for v in row) for row in rows)
    else:
        text = json.dumps(
            {
                "bounds": [[xmin, ymin], [xmax, ymax]],
                "resolution": args.resolution,
                "rss_dbm": rows,
            }
        )
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doateleop",
        description="RSS-gradient DoA teleoperation simulator and evaluation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scenario", default=_env("SCENARIO", "default"))
        p.add_argument("--seed", type=int, default=int(_env("SEED", "0")))
        p.add_argument("--noise", default=_env("NOISE", "default"),
                       help="off | default | path to overrides JSON")
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=("json", "table", "csv"), default="json")

    p = sub.add_parser("run", help="run one scripted trial")
    common(p)
    p.add_argument("--pilot", choices=("gradient", "waypoint", "random"),
                   default="gradient")
    p.add_argument("--route", choices=sorted(DEFAULT_ROUTES), default="petal-west",
                   help="built-in waypoint route (waypoint pilot)")
    p.add_argument("--pilot-params", default=None, help="JSON dict of pilot fields")
    p.add_argument("--samples-csv", action="store_true",
                   help="also write per-sample products (with --out)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("suite", help="run the batch evaluation suite")
    common(p)
    p.set_defaults(seed=int(_env("SEED", "300")))
    p.add_argument("--trials", type=int, default=8)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_suite, format="table")

    p = sub.add_parser("evaluate", help="report on a saved trial log")
    p.add_argument("log")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("json", "table", "csv"), default="json")
    p.add_argument("--samples-csv", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="serve live sessions over websocket")
    p.add_argument("--host", default=_env("HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(_env("PORT", "8750")))
    p.add_argument("--scenario-dir", action="append", default=None)
    p.add_argument("--debug", action="store_true",
                   help="include ground-truth fields in telemetry")
    p.add_argument("--frontend", default=_env("FRONTEND", None),
                   help="directory with the built operator console to host at /")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="replay a saved log over websocket")
    p.add_argument("log")
    p.add_argument("--host", default=_env("HOST", "127.0.0.1"))
    p.add_argument("--port", type=int, default=int(_env("PORT", "8750")))
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("map-probe", help="dump an RSS grid over the map")
    common(p)
    p.add_argument("--resolution", type=float, default=0.25)
    p.add_argument("--time", type=float, default=0.0)
    p.set_defaults(func=cmd_map_probe, format="csv")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
