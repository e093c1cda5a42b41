"""Command line entry point: ``actplan run | heatmap | replay``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .engine import EngineFault
from .harness import LogError, emit_heatmap_data, replay, run
from .scenario import ScenarioError, load_scenario, shipped_scenarios

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INCOMPLETE = 2
EXIT_CONFIG = 3


def _scenario_path(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    shipped = shipped_scenarios()
    if name in shipped:
        return shipped[name]
    raise ScenarioError(f"no scenario file {name!r} (shipped: {', '.join(sorted(shipped))})")


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def cmd_run(args) -> int:
    overrides = {}
    if args.fault_script:
        try:
            faults = json.loads(Path(args.fault_script).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"fault script {args.fault_script}: {exc}") from None
        overrides["faults"] = faults.get("faults", faults) if isinstance(faults, dict) else faults
    scenario = load_scenario(_scenario_path(args.scenario), overrides)
    trial = run(scenario, seed=args.seed, budget=args.rollouts, log_dir=args.log_dir)
    report = trial.report
    print(report.summary())
    if args.json:
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK if report.complete else EXIT_INCOMPLETE


def cmd_heatmap(args) -> int:
    text = emit_heatmap_data(args.log)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
        rows = text.count("\n") - 1
        print(f"wrote {rows} cluster rows to {args.out}")
    return EXIT_OK


def cmd_replay(args) -> int:
    scenario = load_scenario(_scenario_path(args.scenario)) if args.scenario else None
    result = replay(args.trace, scenario)
    for v in result.violations:
        print(v)
    print(f"replayed {result.commands} command statuses: "
          f"{'ok' if result.ok else f'{len(result.violations)} violation(s)'}")
    return EXIT_OK if result.ok else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="actplan", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one trial")
    p.add_argument("--scenario", required=True, help="scenario file or shipped name such as study_1_1")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--rollouts", type=_positive, default=None, help="planner budget per choice point")
    p.add_argument("--fault-script", help="JSON list of fault entries replacing the scenario's")
    p.add_argument("--log-dir", help="write trace.jsonl, rollouts.jsonl, timing.jsonl and report.json here")
    p.add_argument("--json", action="store_true", help="print the full report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("heatmap", help="turn a rollout log into per-call cluster CSV")
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True, help="CSV path or - for stdout")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("replay", help="re-verify invariants over a recorded trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--scenario", help="override the scenario embedded in the trace header")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, LogError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EngineFault as exc:
        print(f"engine fault: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
