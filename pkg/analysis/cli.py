"""
Command-line entry point: build states, run persistency analyses, reproduce
the published table and headline numbers, and evaluate the asymmetry bound.
"""

import argparse
import json
import logging
import sys
import numpy as np
from states import ParseError, parse_state_spec, build_state, state_to_json
from persistency import analyze, asymmetry_bound, report_to_json
from report_generator import compare_with_reference, headline_report, table_rows, write_frame
from reference_data import table_specs
from utilities import config_log, get_budget

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_OPEN_INTERVAL = 2
ANALYSES = ("pe", "pnl", "pnl_star", "strength")


def parse_n_range(text: str) -> list:
    """'3..5' -> [3, 4, 5]; a single integer is a one-element range; '' is empty."""
    if not text:
        return []
    if ".." in text:
        start, stop = text.split("..", 1)
        return list(range(int(start), int(stop) + 1))
    return [int(text)]


def _emit(text: str, out: str = None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text)
        logging.info("Output written to %s", out)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _budget(args):
    return get_budget(restarts=args.restarts, sweeps=args.sweeps,
                      fit_samples=args.fit_samples, tol=args.tol)


def cmd_build(args) -> int:
    """Writes the JSON form of a state."""
    spec = parse_state_spec(args.spec)
    state = build_state(spec)
    for note in spec.notes:
        logging.info("%s: %s", spec.text, note)
    _emit(json.dumps(state_to_json(state)), args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    """Runs the selected analyses; exit code 2 when the P_E interval stays open."""
    spec = parse_state_spec(args.spec)
    state = build_state(spec)
    analyses = tuple(a.strip() for a in args.analyses.split(",") if a.strip())
    unknown = [a for a in analyses if a not in ANALYSES]
    if unknown:
        raise ValueError(f"Unknown analyses {unknown}; choose from {ANALYSES}")
    report = analyze(state, spec.text, _budget(args), args.seed, analyses,
                     k_remove=args.k_remove, jobs=args.jobs)
    report.notes.extend(spec.notes)
    document = report_to_json(report, include_timing=args.timing)
    _emit(json.dumps(document, indent=2, sort_keys=True), args.out)
    if report.pe is not None and not report.pe.exact:
        return EXIT_OPEN_INTERVAL
    return EXIT_OK


def cmd_table(args) -> int:
    """One row per tabulated state of the requested families and sizes."""
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    specs = table_specs(families, parse_n_range(args.n))
    table = table_rows(specs, _budget(args), args.seed, args.jobs)
    if args.compare:
        table = compare_with_reference(table)
    _emit(write_frame(table, fmt=args.format), args.out)
    return EXIT_OK


def cmd_headline(args) -> int:
    """Prints every headline target with its computed value."""
    report = headline_report(args.seed, args.restarts or 8)
    _emit(write_frame(report, fmt=args.format), args.out)
    return EXIT_OK


def cmd_asymmetry(args) -> int:
    """Lower bound on the distance to the nearest symmetric state."""
    with open(args.operator, encoding="utf-8") as f:
        entries = json.load(f)
    operator = np.array([[complex(*entry) if isinstance(entry, list) else complex(entry)
                          for entry in row] for row in entries])
    _emit(f"{asymmetry_bound(args.s, args.l, operator):.6f}", args.out)
    return EXIT_OK


def _common(parser, seed_required: bool = True) -> None:
    parser.add_argument("--seed", type=int, required=seed_required)
    parser.add_argument("--restarts", type=int, default=None)
    parser.add_argument("--sweeps", type=int, default=None)
    parser.add_argument("--fit-samples", type=int, default=None)
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--format", choices=["json", "csv"], default="json")
    parser.add_argument("--out", default=None)
    parser.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per operation."""
    parser = argparse.ArgumentParser(description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    build = sub.add_parser("build", help="write a state as JSON")
    build.add_argument("spec")
    build.add_argument("--out", default=None)
    build.set_defaults(func=cmd_build)

    analyze_parser = sub.add_parser("analyze", help="persistency report for one state")
    analyze_parser.add_argument("spec")
    analyze_parser.add_argument("--analyses", default="pe,pnl,pnl_star")
    analyze_parser.add_argument("--k-remove", type=int, default=None)
    analyze_parser.add_argument("--timing", action="store_true")
    _common(analyze_parser)
    analyze_parser.set_defaults(func=cmd_analyze)

    table = sub.add_parser("table", help="table rows for families of states")
    table.add_argument("--families", default="w")
    table.add_argument("--n", default="3..5")
    table.add_argument("--compare", action="store_true")
    _common(table)
    table.set_defaults(func=cmd_table, format="csv")

    headline = sub.add_parser("headline", help="reproduce the headline numbers")
    _common(headline)
    headline.set_defaults(func=cmd_headline, format="csv")

    asymmetry = sub.add_parser("asymmetry", help="distance bound from a Bell violation")
    asymmetry.add_argument("--s", type=float, required=True)
    asymmetry.add_argument("--l", type=float, required=True)
    asymmetry.add_argument("--operator", required=True)
    asymmetry.add_argument("--out", default=None)
    asymmetry.set_defaults(func=cmd_asymmetry)
    return parser


def main(argv=None) -> int:
    """Parses arguments, dispatches, and maps failures to exit code 1."""
    config_log()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as pe:
        logging.error("Could not parse state spec at position %s: %s", pe.position, pe)
        return EXIT_ERROR
    except (ValueError, OSError) as e:
        logging.error("%s failed: %s", args.command, e)
        return EXIT_ERROR
    except RuntimeError as e:
        logging.error("Unexpected error in %s: %s", args.command, e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
