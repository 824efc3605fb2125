"""Command-line entry point: ``roversim run | sweep | report | scenarios``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

from .errors import LogIntegrityError, ValidationError
from .harness import EventLog, run, sweep
from .metrics import OPS_HOURS_PER_SOL, REPORT_COLUMNS, compute_metrics, daily_traverse_projection
from .scenario import load_scenario
from .terrain import export_terrain, generate_terrain

LOG_DIR_ENV = "ROVERSIM_LOG_DIR"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SAFETY = 3
EXIT_LOG = 4


def shipped_scenarios() -> dict[str, Path]:
    root = resources.files("roversim") / "scenarios"
    return {p.name[:-5]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".json")}


def resolve_scenario(arg: str) -> Path:
    """A file path, or the name of a shipped scenario."""
    path = Path(arg)
    if path.exists():
        return path
    shipped = shipped_scenarios()
    name = arg[:-5] if arg.endswith(".json") else arg
    if name in shipped:
        return shipped[name]
    raise ValidationError("scenario", f"no such file or shipped scenario: {arg!r}")


def parse_values(text: str) -> list:
    """``0.7,1.0`` or a JSON list; each item is parsed as JSON when possible."""
    text = text.strip()
    if text.startswith("["):
        return json.loads(text)
    out = []
    for item in text.split(","):
        item = item.strip()
        try:
            out.append(json.loads(item))
        except json.JSONDecodeError:
            out.append(item)
    return out


def _print_table(report, out=None) -> None:
    out = out or sys.stdout
    flat = report.flat()
    width = max(len(n) for n, _ in REPORT_COLUMNS)
    for name, unit in REPORT_COLUMNS:
        v = flat[name]
        if v is None:
            continue
        text = f"{v:.4f}" if isinstance(v, float) else str(v)
        print(f"{name:<{width}}  {text:>12}  {unit}", file=out)
    if report.distance > 0:
        print(f"{'projection_m_per_sol':<{width}}  {daily_traverse_projection(report, OPS_HOURS_PER_SOL):>12.1f}"
              f"  m/sol at {OPS_HOURS_PER_SOL} h", file=out)


def _log_dir() -> Path:
    return Path(os.environ.get(LOG_DIR_ENV, "roversim-logs"))


def cmd_run(args) -> int:
    scenario = load_scenario(resolve_scenario(args.scenario))
    if args.export_terrain:
        grid = generate_terrain(scenario.terrain, scenario.hazards)
        for p in export_terrain(grid, args.export_terrain):
            print(f"wrote {p}")
    events, report = run(scenario)
    log_path = Path(args.log) if args.log else _log_dir() / f"{scenario.name}.jsonl"
    events.write(log_path)
    print(f"scenario: {scenario.name}")
    print(f"log: {log_path}")
    _print_table(report)
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
    if report.collisions:
        print(f"SAFETY FAILURE: {report.collisions} collision(s)", file=sys.stderr)
        return EXIT_SAFETY
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = load_scenario(resolve_scenario(args.scenario))
    result = sweep(scenario, args.axis, parse_values(args.values), args.seed_policy, args.jobs)
    text = result.to_csv()
    if args.csv:
        Path(args.csv).write_text(text)
    sys.stdout.write(text)
    if any(r.collisions for r in result.reports):
        print("SAFETY FAILURE: collisions in sweep", file=sys.stderr)
        return EXIT_SAFETY
    return EXIT_OK


def cmd_report(args) -> int:
    report = compute_metrics(EventLog.read(args.log))
    _print_table(report)
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
    return EXIT_SAFETY if report.collisions else EXIT_OK


def cmd_scenarios(args) -> int:
    for name, path in sorted(shipped_scenarios().items()):
        print(f"{name}\t{path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roversim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="show warnings from the simulation")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario and print its metrics")
    r.add_argument("scenario", help="scenario JSON file or shipped scenario name")
    r.add_argument("--log", help=f"event log path (default ${LOG_DIR_ENV}/<name>.jsonl)")
    r.add_argument("--csv", help="write the metric table (metric,unit,value) here")
    r.add_argument("--export-terrain", metavar="DIR", help="also write heights/labels CSVs to DIR")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a scenario once per parameter value")
    s.add_argument("scenario")
    s.add_argument("--axis", required=True, help="dotted parameter path, e.g. gnc.v_cmd_faster")
    s.add_argument("--values", required=True, help="comma-separated values or a JSON list")
    s.add_argument("--seed-policy", choices=("same", "per-value"), default="same")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--csv", help="write the sweep table here as well as to stdout")
    s.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("report", help="recompute metrics from an event log")
    rep.add_argument("log")
    rep.add_argument("--csv")
    rep.set_defaults(func=cmd_report)

    ls = sub.add_parser("scenarios", help="list shipped scenarios")
    ls.set_defaults(func=cmd_scenarios)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except LogIntegrityError as exc:
        print(f"log integrity error: {exc}", file=sys.stderr)
        return EXIT_LOG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
