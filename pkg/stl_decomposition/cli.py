"""
Command-line surface.

    stl-decomp decompose <scenario> [--mode M] [--max-iter N] [--out DIR]
                                    [--seed S] [--verify-samples K] [--workers W]
    stl-decomp check <scenario>
    stl-decomp verify <result-dir> [--verify-samples K] [--seed S]

Exit codes follow DecompositionError.exit_code: 0 success, 2 input problems,
3 infeasible, 4 solver failure, 5 soundness violation.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from . import __version__
from .config import MODES
from .errors import DecompositionError
from .harness import decompose, lint, verify_directory
from .reports import emit_reports, structure_table
from .scenario import load_scenario

logger = logging.getLogger(__name__)

RULER = "=" * 70


def _configure_logging(verbose: int, quiet: bool) -> None:
    level = logging.WARNING if quiet else (logging.DEBUG if verbose else logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        "stl-decomp",
        description="Rewrite STL tasks over a communication tree so every task is communication consistent.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    sub = parser.add_subparsers(dest="command", required=True)

    dec = sub.add_parser("decompose", help="decompose a scenario and write a result directory",
                         formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    dec.add_argument("scenario", help="scenario JSON path or shipped scenario name")
    dec.add_argument("--mode", choices=MODES, default=None, help="override the scenario solve mode")
    dec.add_argument("--max-iter", type=int, default=None, help="decentralized round limit")
    dec.add_argument("--out", type=Path, default=None, help="result directory (default results/<name>)")
    dec.add_argument("--seed", type=int, default=None, help="oracle sampling seed")
    dec.add_argument("--verify-samples", type=int, default=None, help="oracle samples per task")
    dec.add_argument("--workers", type=int, default=None, help="parallel local solves per round")

    chk = sub.add_parser("check", help="lint consistency, conflicts and acyclicity without solving")
    chk.add_argument("scenario")

    ver = sub.add_parser("verify", help="re-run the soundness oracle on a result directory")
    ver.add_argument("result_dir", type=Path)
    ver.add_argument("--verify-samples", type=int, default=None)
    ver.add_argument("--seed", type=int, default=None)
    return parser


# ============================================================================
# COMMANDS
# ============================================================================


def _cmd_decompose(args) -> int:
    scenario = load_scenario(args.scenario)
    overrides = {k: v for k, v in (("mode", args.mode), ("max_iter", args.max_iter),
                                   ("workers", args.workers)) if v is not None}
    config = replace(scenario.solver, **overrides)
    verify = scenario.verify
    if args.verify_samples is not None:
        verify = replace(verify, samples=args.verify_samples)
    if args.seed is not None:
        scenario.seed = args.seed

    result = decompose(scenario, config, verify)
    out = args.out or Path("results") / scenario.name
    emit_reports(result, out)

    print(RULER)
    print(f"DECOMPOSITION: {scenario.name}  ({config.mode})")
    print(RULER)
    if result.solution is None:
        print("  every task is already communication consistent")
    else:
        s = result.solution.summary()
        print(f"  status {s['status']}   iterations {s['iterations']}   "
              f"max rho {s['max_rho']:.2e}   {s['wall_time']:.2f}s")
        for row in structure_table(result.problem, result.extraction.decomposed):
            print(f"  edge {row['edge']:>7}  sum alpha {row['sum_alpha']:.4f}  |Pi| {row['pi']:>3}  "
                  f"dim {row['chi_dim']:>4}  rows {row['shared_rows']:>5}  |Q| {row['xi_count']:>2}")
    for d in result.extraction.decomposed:
        path = "->".join(str(i) for i in d.path)
        print(f"  {d.task.label:<16} path {path:<20} accuracy {d.accuracy:.4f}")
    print(f"  rewritten tasks: {len(result.psi_bar)}   verification: "
          f"{'PASS' if result.verification.ok else 'FAIL'}")
    print(f"  results in {out}")
    print(RULER)
    return 0


def _cmd_check(args) -> int:
    scenario = load_scenario(args.scenario)
    report = lint(scenario)
    print(RULER)
    print(f"CHECK: {scenario.name}")
    print(RULER)
    print(f"  communication edges {len(report.comm_edges)}   acyclic {report.acyclic}")
    print(f"  inconsistent tasks  {len(report.inconsistent)}: {', '.join(report.inconsistent) or '-'}")
    for c in report.conflicts.conflicts:
        print(f"  conflict: {c.to_dict()}")
    print(f"  {'OK' if report.ok else 'PROBLEMS FOUND'}")
    print(RULER)
    return 0 if report.ok else 2


def _cmd_verify(args) -> int:
    report = verify_directory(args.result_dir, args.verify_samples, args.seed)
    print(RULER)
    print(f"VERIFY: {args.result_dir}")
    print(RULER)
    for t in report.tasks:
        print(f"  {t.task:<16} {t.passed}/{t.total} samples   accuracy {t.accuracy:.4f}")
    print(f"  conflict free {report.conflict_free}   consistent {report.consistent}   "
          f"edges in comm {report.edges_in_comm}")
    print(f"  {'PASS' if report.ok else 'FAIL'}")
    print(RULER)
    return 0 if report.ok else 5


COMMANDS = {"decompose": _cmd_decompose, "check": _cmd_check, "verify": _cmd_verify}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose, args.quiet)
    try:
        return COMMANDS[args.command](args)
    except DecompositionError as err:
        logger.error("%s", err)
        if err.details:
            print(json.dumps(err.details, indent=2, default=str), file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
