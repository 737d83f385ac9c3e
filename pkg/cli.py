"""
Command-line entry point for the downgrade lab.

    python cli.py list [--benign]
    python cli.py run --attack 07 [--patched] [--seed N] [--out FILE] [--format json|md]
    python cli.py matrix [--seed N] [--out FILE] [--format json|md] [--max-workers N]
    python cli.py session --scenario FILE [--patched] [--seed N] [--out FILE]

Exit codes: 0 success, 1 classification mismatch, 2 bad scenario, script or arguments.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from core.attacks import all_attacks
from core.config import SESSION
from core.errors import DowngradeLabError, FormatError
from core.harness import benign_pairs, emit_report, outcome_to_dict, run_attack, run_matrix, run_session
from core.taxonomy import explain_outcome
from utils.codec import to_plain
from utils.scenario_io import load_scenario

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG = 0, 1, 2


def _write(data: bytes, out: Optional[str]) -> None:
    if out:
        Path(out).write_bytes(data)
        logger.info("wrote %d bytes to %s", len(data), out)
    else:
        sys.stdout.write(data.decode("utf-8"))
        if not data.endswith(b"\n"):
            sys.stdout.write("\n")


REPORT_FORMATS = ("json", "md")


def _check_format(fmt: str) -> None:
    if fmt not in REPORT_FORMATS:
        raise FormatError(f"unknown report format {fmt!r}; use json or md")


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode("utf-8")


def cmd_list(args) -> int:
    if args.benign:
        for scenario in benign_pairs(args.seed):
            print(scenario.name)
        return EXIT_OK
    for attack in all_attacks():
        vector = attack.declared_vector
        marker = "*" if attack.theoretical else " "
        print(f"{attack.id}{marker} {attack.name:<42} {vector.element.value:<9} {vector.vulnerability.value:<14} "
              f"{vector.method.value:<12} {vector.damage.value}")
    return EXIT_OK


def cmd_run(args) -> int:
    _check_format(args.format)
    run = run_attack(args.attack, seed=args.seed)
    outcome = run.patched if args.patched else run.vulnerable
    report = run.report
    if args.format == "md":
        lines = [
            f"# {run.attack.id} {run.attack.name} ({'patched' if args.patched else 'vulnerable'})",
            "",
            f"Declared: {report.declared.element.value} / {report.declared.vulnerability.value} / "
            f"{report.declared.method.value} / {report.declared.damage.value}",
            f"Observed: {outcome.damage.value}",
            "",
            explain_outcome(outcome),
            "",
        ]
        lines += [f"- {note}" for note in run.attack.notes]
        _write("\n".join(lines).encode("utf-8"), args.out)
    else:
        data = {
            "id": run.attack.id,
            "attack": run.attack.name,
            "patched": args.patched,
            "declared": report.declared,
            "damage_match": report.damage_match,
            "method_match": report.method_match,
            "outcome": outcome_to_dict(outcome),
        }
        _write(_json_bytes(to_plain(data)), args.out)
    if args.patched:
        return EXIT_OK if run.patch_holds else EXIT_MISMATCH
    return EXIT_OK if report.matches else EXIT_MISMATCH


def cmd_matrix(args) -> int:
    _check_format(args.format)
    report = run_matrix(seed=args.seed, max_workers=args.max_workers)
    _write(emit_report(report, args.format), args.out)
    summary = report.summary()
    print(f"damage {summary['damage_matches']}/{summary['attacks']}, "
          f"method {summary['method_matches']}/{summary['attacks']}, "
          f"patched broken {len(report.patched_broken)}", file=sys.stderr)
    return EXIT_OK if report.succeeded else EXIT_MISMATCH


def cmd_session(args) -> int:
    scenario = load_scenario(args.scenario, patched=args.patched, seed=args.seed)
    outcome = run_session(scenario)
    data = outcome_to_dict(outcome)
    data["scenario"] = scenario.name
    data["explanation"] = explain_outcome(outcome)
    _write(_json_bytes(data), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="TLS downgrade attack lab",
                                     formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    parser.add_argument("--verbose", "-v", action="count", default=0, help="increase output verbosity")
    commands = parser.add_subparsers(dest="command", required=True)

    listing = commands.add_parser("list", help="list attacks and their declared classification",
                                  formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    listing.add_argument("--benign", action="store_true", help="list the benign (version, suite) sessions instead")
    listing.add_argument("--seed", type=int, default=SESSION["default_seed"], help="seed for benign sessions")
    listing.set_defaults(handler=cmd_list)

    run = commands.add_parser("run", help="run one attack, vulnerable and patched",
                              formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    run.add_argument("--attack", "-a", required=True, help="attack id, 01 to 15")
    run.add_argument("--patched", action="store_true", help="report the patched scenario")
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run.add_argument("--out", "-o", default=None, help="write the report to a file instead of stdout")
    run.add_argument("--format", "-f", default="json", help="json or md")
    run.set_defaults(handler=cmd_run)

    matrix = commands.add_parser("matrix", help="run all fifteen attacks against the classification table",
                                 formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    matrix.add_argument("--seed", type=int, default=SESSION["default_seed"], help="seed for every scenario")
    matrix.add_argument("--out", "-o", default=None, help="write the report to a file instead of stdout")
    matrix.add_argument("--format", "-f", default="json", help="json or md")
    matrix.add_argument("--max-workers", "-w", type=int, default=1, help="attacks run concurrently")
    matrix.set_defaults(handler=cmd_matrix)

    session = commands.add_parser("session", help="run a single scenario file",
                                  formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    session.add_argument("--scenario", "-s", required=True, help="path to a scenario JSON file")
    session.add_argument("--patched", action="store_true", help="apply the scenario's patch first")
    session.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    session.add_argument("--out", "-o", default=None, help="write the outcome to a file instead of stdout")
    session.set_defaults(handler=cmd_session)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        datefmt="%Y-%m-%d %H:%M:%S",
        format="{asctime}.{msecs:0<3.0f} {module} {threadName} {levelname}: {message}",
        style="{",
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(2, args.verbose)],
    )

    try:
        return args.handler(args)
    except DowngradeLabError as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
